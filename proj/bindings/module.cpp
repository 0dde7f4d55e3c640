// Python bindings for the interference simulation and analysis core.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "homsim/config.hpp"
#include "homsim/correlator.hpp"
#include "homsim/errors.hpp"
#include "homsim/fit.hpp"
#include "homsim/model.hpp"
#include "homsim/presets.hpp"
#include "homsim/rng.hpp"
#include "homsim/sim.hpp"
#include "homsim/tags.hpp"
#include "homsim/tuning.hpp"

namespace py = pybind11;
using namespace homsim;

namespace {

py::array_t<std::uint64_t> stream_times(const TimeTagStream& s) {
    py::array_t<std::uint64_t> out(static_cast<py::ssize_t>(s.size()));
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < s.size(); ++i) p[i] = s.tags[i].t_ps;
    return out;
}

py::array_t<std::uint8_t> stream_channels(const TimeTagStream& s) {
    py::array_t<std::uint8_t> out(static_cast<py::ssize_t>(s.size()));
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < s.size(); ++i) p[i] = s.tags[i].channel;
    return out;
}

TimeTagStream stream_from_arrays(py::array_t<std::uint64_t> times,
                                 py::array_t<std::uint8_t> channels) {
    if (times.ndim() != 1 || channels.ndim() != 1 ||
        times.shape(0) != channels.shape(0))
        throw config_error("times and channels must be 1-d arrays of equal "
                           "length");
    TimeTagStream s;
    s.tags.resize(static_cast<std::size_t>(times.shape(0)));
    const auto t = times.unchecked<1>();
    const auto c = channels.unchecked<1>();
    for (py::ssize_t i = 0; i < times.shape(0); ++i)
        s.tags[static_cast<std::size_t>(i)] = {t(i), c(i)};
    s.validate();
    return s;
}

py::array_t<std::uint64_t> hist_counts(const CorrelationHistogram& h) {
    py::array_t<std::uint64_t> out(static_cast<py::ssize_t>(h.n_bins()));
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < h.n_bins(); ++i) p[i] = h.counts[i];
    return out;
}

py::array_t<double> hist_centers(const CorrelationHistogram& h) {
    py::array_t<double> out(static_cast<py::ssize_t>(h.n_bins()));
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < h.n_bins(); ++i) p[i] = h.bin_center_ps(i);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Pulsed two-photon interference: simulation, correlation, "
              "fitting, and tuning";
    m.attr("__version__") = "1.0.0";

    py::register_exception<config_error>(m, "ConfigError");
    py::register_exception<numerical_error>(m, "NumericalError");
    py::register_exception<io_error>(m, "IoError");

    // --- model ----------------------------------------------------------
    py::class_<EmitterParams>(m, "EmitterParams")
        .def_static("from_fwhm", &EmitterParams::from_fwhm, py::arg("t1_ns"),
                    py::arg("fwhm_mhz"), py::arg("center_freq_mhz") = 0.0)
        .def_static("from_t2", &EmitterParams::from_t2, py::arg("t1_ns"),
                    py::arg("t2_ns"), py::arg("center_freq_mhz") = 0.0)
        .def_readonly("t1_ns", &EmitterParams::t1_ns)
        .def_readonly("t2_ns", &EmitterParams::t2_ns)
        .def_readonly("fwhm_mhz", &EmitterParams::fwhm_mhz)
        .def_readonly("center_freq_mhz", &EmitterParams::center_freq_mhz)
        .def("__repr__", [](const EmitterParams& e) {
            return "EmitterParams(t1_ns=" + std::to_string(e.t1_ns) +
                   ", t2_ns=" + std::to_string(e.t2_ns) +
                   ", center_freq_mhz=" + std::to_string(e.center_freq_mhz) +
                   ")";
        });

    py::class_<TwoEmitterParams>(m, "TwoEmitterParams")
        .def(py::init<>())
        .def_readwrite("emitter1", &TwoEmitterParams::emitter1)
        .def_readwrite("emitter2", &TwoEmitterParams::emitter2)
        .def_readwrite("detuning_mhz", &TwoEmitterParams::detuning_mhz)
        .def_readwrite("v_factor", &TwoEmitterParams::v_factor)
        .def_readwrite("sigma1_mhz", &TwoEmitterParams::sigma1_mhz)
        .def_readwrite("sigma2_mhz", &TwoEmitterParams::sigma2_mhz)
        .def_readwrite("period_ns", &TwoEmitterParams::period_ns);

    m.def("t2_from_fwhm", &t2_from_fwhm, py::arg("fwhm_mhz"));
    m.def("fwhm_from_t2", &fwhm_from_t2, py::arg("t2_ns"));
    m.def("dephasing_time", &dephasing_time, py::arg("t1_ns"),
          py::arg("t2_ns"));
    m.def("max_visibility", &max_visibility, py::arg("t1_ns"),
          py::arg("t2_ns"));
    m.def("g1_envelope", &g1_envelope, py::arg("tau_ns"), py::arg("emitter"));
    m.def("g2_hbt_model", &g2_hbt_model, py::arg("tau_ns"), py::arg("t1_ns"),
          py::arg("period_ns"));
    m.def("g2_hom_distinct", &g2_hom_distinct, py::arg("tau_ns"),
          py::arg("params"));
    m.def("v_factor_from_zero", &v_factor_from_zero,
          py::arg("g2_hom_at_zero"));
    m.def("polarization_visibility", &polarization_visibility,
          py::arg("g2_perp_area"), py::arg("g2_par_area"));
    m.def("predict_visibility", &predict_visibility, py::arg("params"),
          py::arg("halfwidth_ns") = std::nullopt);

    // --- time tags --------------------------------------------------------
    py::class_<TimeTagStream>(m, "TimeTagStream")
        .def(py::init<>())
        .def_static("from_arrays", &stream_from_arrays, py::arg("times_ps"),
                    py::arg("channels"))
        .def("__len__", &TimeTagStream::size)
        .def_property_readonly("times_ps", &stream_times)
        .def_property_readonly("channels", &stream_channels);

    m.def("read_tags", &read_tags, py::arg("path"));
    m.def("write_tags", &write_tags, py::arg("stream"), py::arg("path"));

    // --- simulation -------------------------------------------------------
    py::class_<SpectralDiffusionParams>(m, "SpectralDiffusionParams")
        .def(py::init([](double sigma_mhz, double corr_time_s) {
                 return SpectralDiffusionParams{sigma_mhz, corr_time_s};
             }),
             py::arg("sigma_mhz") = 0.0, py::arg("corr_time_s") = 200.0)
        .def_readwrite("sigma_mhz", &SpectralDiffusionParams::sigma_mhz)
        .def_readwrite("corr_time_s", &SpectralDiffusionParams::corr_time_s);

    py::class_<StarkShiftParams>(m, "StarkShiftParams")
        .def(py::init<>())
        .def_readwrite("max_shift_ghz", &StarkShiftParams::max_shift_ghz)
        .def_readwrite("dose_scale", &StarkShiftParams::dose_scale)
        .def_readwrite("sign", &StarkShiftParams::sign)
        .def_readwrite("range_lo_ghz", &StarkShiftParams::range_lo_ghz)
        .def_readwrite("range_hi_ghz", &StarkShiftParams::range_hi_ghz);

    py::enum_<SimMode>(m, "SimMode")
        .value("HBT", SimMode::HBT)
        .value("HOM_SINGLE", SimMode::HOM_SINGLE)
        .value("HOM_DISTINCT", SimMode::HOM_DISTINCT);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("mode", &SimConfig::mode)
        .def_readwrite("emitters", &SimConfig::emitters)
        .def_readwrite("diffusion", &SimConfig::diffusion)
        .def_readwrite("period_ns", &SimConfig::period_ns)
        .def_readwrite("emission_prob", &SimConfig::emission_prob)
        .def_readwrite("duration_s", &SimConfig::duration_s)
        .def_readwrite("v_factor", &SimConfig::v_factor)
        .def_readwrite("detector_jitter_ps", &SimConfig::detector_jitter_ps)
        .def_readwrite("dead_time_ps", &SimConfig::dead_time_ps)
        .def_readwrite("background_rate_cps", &SimConfig::background_rate_cps)
        .def_readwrite("rng_seed", &SimConfig::rng_seed)
        .def_readwrite("bin_resolution_ps", &SimConfig::bin_resolution_ps);

    py::class_<ScanConfig>(m, "ScanConfig")
        .def(py::init<>())
        .def_readwrite("emitter", &ScanConfig::emitter)
        .def_readwrite("diffusion", &ScanConfig::diffusion)
        .def_readwrite("half_range_mhz", &ScanConfig::half_range_mhz)
        .def_readwrite("n_points", &ScanConfig::n_points)
        .def_readwrite("n_rows", &ScanConfig::n_rows)
        .def_readwrite("row_time_s", &ScanConfig::row_time_s)
        .def_readwrite("peak_counts", &ScanConfig::peak_counts)
        .def_readwrite("baseline_counts", &ScanConfig::baseline_counts)
        .def_readwrite("poisson_noise", &ScanConfig::poisson_noise)
        .def_readwrite("pump_power_uw", &ScanConfig::pump_power_uw)
        .def_readwrite("rng_seed", &ScanConfig::rng_seed);

    py::class_<ScanResult>(m, "ScanResult")
        .def_readonly("freq_mhz", &ScanResult::freq_mhz)
        .def_readonly("rows", &ScanResult::rows)
        .def_readonly("true_centers_mhz", &ScanResult::true_centers_mhz);

    m.def("simulate", [](const SimConfig& cfg) {
        std::array<TimeTagStream, 2> streams;
        {
            py::gil_scoped_release release;
            streams = simulate(cfg);
        }
        return py::make_tuple(std::move(streams[0]), std::move(streams[1]));
    }, py::arg("config"));
    m.def("simulate_excitation_scan",
          [](const ScanConfig& cfg) { return simulate_excitation_scan(cfg); },
          py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def("stark_shift", &stark_shift, py::arg("dose"), py::arg("params"));

    // --- correlation ------------------------------------------------------
    py::class_<CorrelationConfig>(m, "CorrelationConfig")
        .def(py::init<>())
        .def_readwrite("bin_width_ps", &CorrelationConfig::bin_width_ps)
        .def_readwrite("max_lag_ns", &CorrelationConfig::max_lag_ns)
        .def_readwrite("window_length_s", &CorrelationConfig::window_length_s)
        .def_readwrite("window_step_s", &CorrelationConfig::window_step_s);

    py::class_<CorrelationHistogram>(m, "CorrelationHistogram")
        .def_property_readonly("counts", &hist_counts)
        .def_property_readonly("bin_centers_ps", &hist_centers)
        .def_readonly("bin_width_ps", &CorrelationHistogram::bin_width_ps)
        .def_readonly("first_bin", &CorrelationHistogram::first_bin)
        .def("__len__", &CorrelationHistogram::n_bins);

    m.def("cross_correlate",
          [](const TimeTagStream& ch0, const TimeTagStream& ch1,
             const CorrelationConfig& cfg) {
              return cross_correlate(ch0, ch1, cfg);
          },
          py::arg("ch0"), py::arg("ch1"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("cross_correlate_files", &cross_correlate_files, py::arg("path0"),
          py::arg("path1"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<PeakAreas>(m, "PeakAreas")
        .def_readonly("areas", &PeakAreas::areas)
        .def_readonly("period_ns", &PeakAreas::period_ns)
        .def_readonly("integration_halfwidth_ns",
                      &PeakAreas::integration_halfwidth_ns);

    py::class_<VisibilityEstimate>(m, "VisibilityEstimate")
        .def_readonly("visibility", &VisibilityEstimate::visibility)
        .def_readonly("visibility_err", &VisibilityEstimate::visibility_err)
        .def_readonly("v_factor", &VisibilityEstimate::v_factor)
        .def_readonly("v_factor_err", &VisibilityEstimate::v_factor_err);

    m.def("peak_areas", &peak_areas, py::arg("hist"), py::arg("period_ns"),
          py::arg("n_max"), py::arg("halfwidth_ns") = std::nullopt);
    m.def("visibility_from_areas",
          [](const PeakAreas& areas, const std::set<int>& exclude,
             const std::optional<PeakAreas>& narrow) {
              return visibility_from_areas(areas, exclude,
                                           narrow ? &*narrow : nullptr);
          },
          py::arg("areas"), py::arg("exclude") = std::set<int>{-1, 1},
          py::arg("narrow") = std::nullopt);

    py::class_<VisibilityPoint>(m, "VisibilityPoint")
        .def_readonly("window_start_s", &VisibilityPoint::window_start_s)
        .def_readonly("estimate", &VisibilityPoint::estimate);

    m.def("sliding_visibility",
          [](const TimeTagStream& tags, const CorrelationConfig& cfg,
             double period_ns, int n_max,
             std::optional<double> narrow_halfwidth_ns) {
              return sliding_visibility(tags, cfg, period_ns, n_max,
                                        narrow_halfwidth_ns);
          },
          py::arg("tags"), py::arg("config"), py::arg("period_ns"),
          py::arg("n_max") = 13, py::arg("narrow_halfwidth_ns") = std::nullopt,
          py::call_guard<py::gil_scoped_release>());

    // --- fitting ------------------------------------------------------------
    py::class_<LorentzianFit>(m, "LorentzianFit")
        .def_readonly("center_mhz", &LorentzianFit::center_mhz)
        .def_readonly("fwhm_mhz", &LorentzianFit::fwhm_mhz)
        .def_readonly("amplitude", &LorentzianFit::amplitude)
        .def_readonly("offset", &LorentzianFit::offset)
        .def_readonly("center_err_mhz", &LorentzianFit::center_err_mhz)
        .def_readonly("fwhm_err_mhz", &LorentzianFit::fwhm_err_mhz)
        .def_readonly("chi2_per_dof", &LorentzianFit::chi2_per_dof)
        .def_readonly("converged", &LorentzianFit::converged);

    py::class_<WanderingStats>(m, "WanderingStats")
        .def_readonly("sigma_mhz", &WanderingStats::sigma_mhz)
        .def_readonly("sigma_err_mhz", &WanderingStats::sigma_err_mhz)
        .def_readonly("centers_mhz", &WanderingStats::centers_mhz)
        .def_readonly("hist_edges_mhz", &WanderingStats::hist_edges_mhz)
        .def_readonly("hist_counts", &WanderingStats::hist_counts);

    m.def("fit_lorentzian", &fit_lorentzian, py::arg("freq_mhz"),
          py::arg("counts"));
    m.def("wandering_stats", &wandering_stats, py::arg("fits"));

    py::class_<HbtFitResult>(m, "HbtFitResult")
        .def_readonly("t1_ns", &HbtFitResult::t1_ns)
        .def_readonly("t1_err_ns", &HbtFitResult::t1_err_ns)
        .def_readonly("scale", &HbtFitResult::scale)
        .def_readonly("background", &HbtFitResult::background)
        .def_readonly("g2_zero_area", &HbtFitResult::g2_zero_area)
        .def_readonly("g2_zero_err", &HbtFitResult::g2_zero_err)
        .def_readonly("chi2_per_dof", &HbtFitResult::chi2_per_dof)
        .def_readonly("converged", &HbtFitResult::converged);

    m.def("fit_hbt", &fit_hbt, py::arg("hist"), py::arg("period_ns"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<HomFitOptions>(m, "HomFitOptions")
        .def(py::init<>())
        .def_readwrite("detuning_mhz", &HomFitOptions::detuning_mhz)
        .def_readwrite("v_factor", &HomFitOptions::v_factor)
        .def_readwrite("t1_1_ns", &HomFitOptions::t1_1_ns)
        .def_readwrite("t1_2_ns", &HomFitOptions::t1_2_ns)
        .def_readwrite("t2_1_ns", &HomFitOptions::t2_1_ns)
        .def_readwrite("t2_2_ns", &HomFitOptions::t2_2_ns)
        .def_readwrite("sigma_joint_mhz", &HomFitOptions::sigma_joint_mhz)
        .def_readwrite("period_ns", &HomFitOptions::period_ns)
        .def_readwrite("conv_sigma_ps", &HomFitOptions::conv_sigma_ps)
        .def_readwrite("grid_step_mhz", &HomFitOptions::grid_step_mhz)
        .def_readwrite("max_iterations", &HomFitOptions::max_iterations);

    py::class_<HomFitResult>(m, "HomFitResult")
        .def_readonly("detuning_mhz", &HomFitResult::detuning_mhz)
        .def_readonly("v_factor", &HomFitResult::v_factor)
        .def_readonly("t1_1_ns", &HomFitResult::t1_1_ns)
        .def_readonly("t1_2_ns", &HomFitResult::t1_2_ns)
        .def_readonly("t2_1_ns", &HomFitResult::t2_1_ns)
        .def_readonly("t2_2_ns", &HomFitResult::t2_2_ns)
        .def_readonly("sigma_joint_mhz", &HomFitResult::sigma_joint_mhz)
        .def_readonly("scale", &HomFitResult::scale)
        .def_readonly("detuning_err_mhz", &HomFitResult::detuning_err_mhz)
        .def_readonly("v_factor_err", &HomFitResult::v_factor_err)
        .def_readonly("t1_1_err_ns", &HomFitResult::t1_1_err_ns)
        .def_readonly("t1_2_err_ns", &HomFitResult::t1_2_err_ns)
        .def_readonly("t2_1_err_ns", &HomFitResult::t2_1_err_ns)
        .def_readonly("t2_2_err_ns", &HomFitResult::t2_2_err_ns)
        .def_readonly("sigma_joint_err_mhz",
                      &HomFitResult::sigma_joint_err_mhz)
        .def_readonly("scale_err", &HomFitResult::scale_err)
        .def_readonly("chi2_per_dof", &HomFitResult::chi2_per_dof)
        .def_readonly("n_iterations", &HomFitResult::n_iterations)
        .def_readonly("converged", &HomFitResult::converged)
        .def_readonly("resolution_limited", &HomFitResult::resolution_limited)
        .def_readonly("detuning_unidentifiable",
                      &HomFitResult::detuning_unidentifiable)
        .def_readonly("nyquist_mhz", &HomFitResult::nyquist_mhz)
        .def_readonly("free_names", &HomFitResult::free_names)
        .def_readonly("covariance", &HomFitResult::covariance);

    m.def("fit_hom", &fit_hom, py::arg("hist"),
          py::arg("options") = HomFitOptions{},
          py::call_guard<py::gil_scoped_release>());

    m.def("fit_to_json",
          [](const HomFitResult& r) { return to_json(r); });
    m.def("fit_to_json",
          [](const HbtFitResult& r) { return to_json(r); });
    m.def("fit_to_json",
          [](const LorentzianFit& r) { return to_json(r); });

    // --- tuning -------------------------------------------------------------
    py::class_<TuneOptions>(m, "TuneOptions")
        .def(py::init<>())
        .def_readwrite("target_mhz", &TuneOptions::target_mhz)
        .def_readwrite("dose_budget", &TuneOptions::dose_budget)
        .def_readwrite("max_steps", &TuneOptions::max_steps)
        .def_readwrite("probe_averages", &TuneOptions::probe_averages)
        .def_readwrite("safety", &TuneOptions::safety);

    py::class_<TuneStep>(m, "TuneStep")
        .def_readonly("step", &TuneStep::step)
        .def_readonly("dose", &TuneStep::dose)
        .def_readonly("nu1_mhz", &TuneStep::nu1_mhz)
        .def_readonly("nu2_mhz", &TuneStep::nu2_mhz)
        .def_readonly("measured_detuning_mhz",
                      &TuneStep::measured_detuning_mhz);

    py::class_<TuneResult>(m, "TuneResult")
        .def_readonly("success", &TuneResult::success)
        .def_readonly("failure_reason", &TuneResult::failure_reason)
        .def_readonly("final_detuning_mhz", &TuneResult::final_detuning_mhz)
        .def_readonly("total_dose", &TuneResult::total_dose)
        .def_readonly("n_steps", &TuneResult::n_steps)
        .def_readonly("transcript", &TuneResult::transcript);

    m.def("auto_tune",
          [](const EmitterParams& e1, const EmitterParams& e2,
             const StarkShiftParams& shift, double probe_noise_mhz,
             double step_dose, std::uint64_t seed, const TuneOptions& options) {
              Rng rng(seed);
              return auto_tune(e1, e2, shift, probe_noise_mhz, step_dose, rng,
                               options);
          },
          py::arg("emitter1"), py::arg("emitter2"), py::arg("shift"),
          py::arg("probe_noise_mhz"), py::arg("step_dose"), py::arg("seed"),
          py::arg("options") = TuneOptions{});

    // --- presets and configuration -------------------------------------------
    py::class_<TuneSetup>(m, "TuneSetup")
        .def(py::init<>())
        .def_readwrite("emitter1", &TuneSetup::emitter1)
        .def_readwrite("emitter2", &TuneSetup::emitter2)
        .def_readwrite("shift", &TuneSetup::shift)
        .def_readwrite("probe_noise_mhz", &TuneSetup::probe_noise_mhz)
        .def_readwrite("step_dose", &TuneSetup::step_dose)
        .def_readwrite("options", &TuneSetup::options)
        .def_readwrite("rng_seed", &TuneSetup::rng_seed);

    py::class_<Preset> preset_class(m, "Preset");
    py::enum_<Preset::Kind>(preset_class, "Kind")
        .value("Sim", Preset::Kind::Sim)
        .value("Scan", Preset::Kind::Scan)
        .value("Tune", Preset::Kind::Tune);
    preset_class
        .def_readonly("name", &Preset::name)
        .def_readonly("description", &Preset::description)
        .def_readonly("kind", &Preset::kind)
        .def_readonly("sim", &Preset::sim)
        .def_readonly("scan", &Preset::scan)
        .def_readonly("tune", &Preset::tune)
        .def_readonly("correlation", &Preset::correlation)
        .def_readonly("fit_model", &Preset::fit_model);

    m.def("preset", &preset, py::arg("name"),
          py::return_value_policy::reference);
    m.def("all_presets", &all_presets, py::return_value_policy::reference);

    m.def("sim_config_from_json", &sim_config_from_json, py::arg("text"));
    m.def("sim_config_to_json",
          [](const SimConfig& cfg) { return to_json(cfg); }, py::arg("config"));
}
