#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "homsim/model.hpp"
#include "homsim/tags.hpp"

namespace homsim {

// Options shared by histogram construction and sliding-window analysis.
struct CorrelationConfig {
    std::int64_t bin_width_ps = 500;
    double max_lag_ns = 600.0;
    double window_length_s = 30.0;
    double window_step_s = 1.0;

    void validate() const;
    std::int64_t max_lag_ps() const;
};

// Cross-correlation histogram over signed delays tau = t(ch1) - t(ch0).
// Bins are edge-aligned: bin i covers [i*bw, (i+1)*bw) ps, so bin centers sit
// at half-offsets (i + 1/2)*bw.  Indices run over [-n_half, n_half-1] with
// n_half = floor(max_lag/bw) + 1, covering the symmetric delay span [-L, L)
// with L = n_half*bw >= max_lag.
struct CorrelationHistogram {
    std::vector<std::uint64_t> counts;
    std::int64_t bin_width_ps = 0;
    std::int64_t first_bin = 0;  // bin index of counts[0]
    std::array<std::uint64_t, 2> total_tags = {0, 0};
    double wall_start_s = 0.0;
    double wall_end_s = 0.0;

    std::size_t n_bins() const { return counts.size(); }
    double bin_center_ps(std::size_t j) const {
        return (static_cast<double>(first_bin) + static_cast<double>(j) + 0.5) *
               static_cast<double>(bin_width_ps);
    }
};

// Single-pass streaming pair correlator.  Feed tags in non-decreasing time
// order; memory stays bounded by the number of tags within one max_lag span.
class PairCorrelator {
public:
    PairCorrelator(std::int64_t bin_width_ps, std::int64_t max_lag_ps);

    void add(std::uint64_t t_ps, unsigned channel);
    CorrelationHistogram finish();

private:
    struct Ring {
        std::vector<std::uint64_t> buf;
        std::size_t head = 0;
        std::size_t count = 0;
        void push(std::uint64_t t);
        void pop_front();
        std::uint64_t front() const { return buf[head]; }
        bool empty() const { return count == 0; }
    };

    std::int64_t bw_;
    std::int64_t span_ps_;  // L = n_half * bw
    std::int64_t first_bin_;
    std::vector<std::uint64_t> counts_;
    std::array<Ring, 2> rings_;
    std::array<std::uint64_t, 2> totals_ = {0, 0};
    std::uint64_t last_t_ = 0;
    bool any_ = false;
    std::uint64_t t_min_ = 0;
    std::uint64_t t_max_ = 0;
};

// Correlates a merged, sorted stream carrying both channel labels.
CorrelationHistogram cross_correlate(const TimeTagStream& tags,
                                     const CorrelationConfig& config);

// Correlates two per-channel streams (merged internally).
CorrelationHistogram cross_correlate(const TimeTagStream& ch0,
                                     const TimeTagStream& ch1,
                                     const CorrelationConfig& config);

// Streaming variant over tag files; memory independent of file size.
CorrelationHistogram cross_correlate_files(const std::string& path0,
                                           const std::string& path1,
                                           const CorrelationConfig& config);

// Integrates histogram counts into per-peak areas.  Peak n owns the delay
// window (n*T - h, n*T + h] evaluated on bin centers, with h the integration
// halfwidth (default half a period, making the windows partition the axis).
PeakAreas peak_areas(const CorrelationHistogram& hist, double period_ns,
                     int n_max,
                     std::optional<double> halfwidth_ns = std::nullopt);

// One visibility sample per sliding window.
struct VisibilityPoint {
    double window_start_s = 0.0;  // seconds from the first tag
    VisibilityEstimate estimate;
};
using VisibilitySeries = std::vector<VisibilityPoint>;

// Per-window histogram hook used by callers that run further analysis
// (e.g. per-window fits) without a second pass over the tags.
using WindowCallback =
    std::function<void(double window_start_s, const CorrelationHistogram&)>;

// Sliding-window visibility over a merged, sorted stream.  Windows of
// `window_length_s` advance by `window_step_s`, aligned to the first tag;
// a pair belongs to the window containing its earlier tag.  Histograms are
// accumulated once into step-sized buckets and windows are assembled
// incrementally, so the cost is O(total pairs) and memory is bounded by
// (window/step) bucket histograms.  The trailing partial window is skipped.
VisibilitySeries sliding_visibility(const TimeTagStream& tags,
                                    const CorrelationConfig& config,
                                    double period_ns, int n_max = 13,
                                    std::optional<double> narrow_halfwidth_ns =
                                        std::nullopt,
                                    const WindowCallback& per_window = nullptr);

VisibilitySeries sliding_visibility_files(
    const std::string& path0, const std::string& path1,
    const CorrelationConfig& config, double period_ns, int n_max = 13,
    std::optional<double> narrow_halfwidth_ns = std::nullopt,
    const WindowCallback& per_window = nullptr);

}  // namespace homsim
