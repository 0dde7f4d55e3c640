"""Smoke tests for the Python bindings and the installed command-line tool."""

import json
import math
import os
import subprocess

import pytest

import homsim


def small_pair_config(detuning_mhz=200.0, seed=21, duration_s=0.2):
    cfg = homsim.SimConfig()
    cfg.mode = homsim.SimMode.HOM_DISTINCT
    cfg.emitters = [
        homsim.EmitterParams.from_fwhm(4.0, 50.0, 0.0),
        homsim.EmitterParams.from_fwhm(4.0, 50.0, detuning_mhz),
    ]
    cfg.diffusion = [
        homsim.SpectralDiffusionParams(5.0, 1e-4),
        homsim.SpectralDiffusionParams(5.0, 1e-4),
    ]
    cfg.emission_prob = 0.01
    cfg.duration_s = duration_s
    cfg.detector_jitter_ps = 0.0
    cfg.dead_time_ps = 0.0
    cfg.background_rate_cps = 0.0
    cfg.rng_seed = seed
    return cfg


def test_coherence_relations():
    t2 = homsim.t2_from_fwhm(52.0)
    assert t2 == pytest.approx(6.121343965072898)
    assert homsim.fwhm_from_t2(t2) == pytest.approx(52.0)
    assert homsim.dephasing_time(4.0, 6.1) == pytest.approx(25.684210526, rel=1e-9)
    e = homsim.EmitterParams.from_fwhm(4.25, 59.0, 40.0)
    assert e.t1_ns == 4.25
    assert e.center_freq_mhz == 40.0
    assert e.t2_ns == pytest.approx(homsim.t2_from_fwhm(59.0))


def test_bad_emitter_raises_config_error():
    with pytest.raises(homsim.ConfigError):
        homsim.EmitterParams.from_t2(4.0, 9.0)  # t2 > 2*t1


def test_predicted_visibility_for_reference_pair():
    p = homsim.preset("couple1")
    assert p.kind == homsim.Preset.Kind.Sim
    sim = p.sim
    params = homsim.TwoEmitterParams()
    params.emitter1 = sim.emitters[0]
    params.emitter2 = sim.emitters[1]
    params.detuning_mhz = sim.emitters[1].center_freq_mhz
    params.v_factor = sim.v_factor
    params.sigma1_mhz = sim.diffusion[0].sigma_mhz
    params.sigma2_mhz = sim.diffusion[1].sigma_mhz
    params.period_ns = sim.period_ns
    assert homsim.predict_visibility(params) == pytest.approx(
        0.42469932133012617
    )


def test_simulate_correlate_fit_roundtrip(tmp_path):
    cfg = small_pair_config()
    ch0, ch1 = homsim.simulate(cfg)
    assert len(ch0) > 1000 and len(ch1) > 1000
    times = ch0.times_ps
    assert (times[1:] >= times[:-1]).all()

    cc = homsim.CorrelationConfig()
    cc.bin_width_ps = 250
    cc.max_lag_ns = 200.0
    hist = homsim.cross_correlate(ch0, ch1, cc)
    assert int(hist.counts.sum()) > 0
    assert len(hist.bin_centers_ps) == len(hist)

    areas = homsim.peak_areas(hist, 40.0, 4)
    vis = homsim.visibility_from_areas(areas)
    assert -0.5 < vis.visibility < 1.0

    fit = homsim.fit_hom(hist)
    assert fit.converged
    assert 0.3 < fit.v_factor < 1.7
    assert fit.chi2_per_dof < 3.0
    payload = json.loads(homsim.fit_to_json(fit))
    assert "parameters" in payload

    # Tag files round-trip through the binary format.
    path = os.fspath(tmp_path / "ch0.ttag")
    homsim.write_tags(ch0, path)
    back = homsim.read_tags(path)
    assert len(back) == len(ch0)
    assert (back.times_ps == ch0.times_ps).all()


def test_auto_tune_converges_without_noise():
    e1 = homsim.EmitterParams.from_fwhm(4.0, 52.0, 0.0)
    e2 = homsim.EmitterParams.from_fwhm(4.0, 52.0, -60e3)
    shift = homsim.StarkShiftParams()
    shift.max_shift_ghz = 100.0
    result = homsim.auto_tune(e1, e2, shift, 0.0, 2.0, seed=3)
    assert result.success
    assert abs(result.final_detuning_mhz) < 50.0
    assert result.transcript[0].dose == 0.0


def test_sim_config_json_roundtrip():
    cfg = small_pair_config()
    text = homsim.sim_config_to_json(cfg)
    back = homsim.sim_config_from_json(text)
    assert back.rng_seed == cfg.rng_seed
    assert back.emitters[1].center_freq_mhz == pytest.approx(200.0)
    with pytest.raises(homsim.ConfigError):
        homsim.sim_config_from_json('{"mode": "nonsense"}')


def test_cli_binary_runs(tmp_path):
    cli = os.environ.get("HOMSIM_CLI")
    if not cli:
        pytest.skip("HOMSIM_CLI not set")
    out = subprocess.run(
        [cli, "tune", "--preset", "tune", "--out", os.fspath(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0, out.stderr
    transcript = (tmp_path / "transcript.csv").read_text()
    assert transcript.startswith("step,dose,nu1_MHz,nu2_MHz,measured_detuning_MHz")
