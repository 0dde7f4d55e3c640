#include "homsim/correlator.hpp"

#include <algorithm>
#include <cmath>

#include "homsim/errors.hpp"
#include "homsim/units.hpp"

namespace homsim {

namespace {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    std::int64_t r = a % b;
    if (r != 0 && ((r < 0) != (b < 0))) --q;
    return q;
}

// Peak index owning a bin with doubled center 2c, for period P (both ps):
// realizes the half-open ownership window (n*P - P/2, n*P + P/2].
inline std::int64_t peak_index(std::int64_t c2, std::int64_t period_ps) {
    return floor_div(c2 + period_ps - 1, 2 * period_ps);
}

struct SlidingState {
    std::int64_t step_ps = 0;
    std::size_t n_buckets_per_window = 0;
    std::int64_t cur_bucket = 0;
    std::int64_t next_window = 0;  // first bucket index of the next window
    std::vector<std::vector<std::uint64_t>> ring;  // bucket histograms
    std::size_t ring_pos = 0;
    std::vector<std::uint64_t> bucket;   // accumulating current bucket
    std::vector<std::uint64_t> window;   // rolling sum over the ring
};

}  // namespace

void CorrelationConfig::validate() const {
    if (bin_width_ps <= 0) throw config_error("bin_width must be > 0 ps");
    if (!(max_lag_ns > 0.0)) throw config_error("max_lag must be > 0 ns");
    if (!(window_length_s > 0.0) || !(window_step_s > 0.0))
        throw config_error("window length and step must be > 0 s");
    if (window_step_s > window_length_s)
        throw config_error("window step must not exceed the window length");
    double ratio = window_length_s / window_step_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw config_error("window length must be an integer multiple of step");
}

std::int64_t CorrelationConfig::max_lag_ps() const {
    return static_cast<std::int64_t>(std::llround(max_lag_ns * ps_per_ns));
}

void PairCorrelator::Ring::push(std::uint64_t t) {
    if (count == buf.size()) {
        std::vector<std::uint64_t> grown(std::max<std::size_t>(16, buf.size() * 2));
        for (std::size_t i = 0; i < count; ++i)
            grown[i] = buf[(head + i) & (buf.size() - 1)];
        buf = std::move(grown);
        head = 0;
    }
    buf[(head + count) & (buf.size() - 1)] = t;
    ++count;
}

void PairCorrelator::Ring::pop_front() {
    head = (head + 1) & (buf.size() - 1);
    --count;
}

PairCorrelator::PairCorrelator(std::int64_t bin_width_ps,
                               std::int64_t max_lag_ps)
    : bw_(bin_width_ps) {
    if (bw_ <= 0) throw config_error("bin_width must be > 0 ps");
    if (max_lag_ps <= 0) throw config_error("max_lag must be > 0 ps");
    std::int64_t n_half = max_lag_ps / bw_ + 1;
    span_ps_ = n_half * bw_;
    first_bin_ = -n_half;
    counts_.assign(static_cast<std::size_t>(2 * n_half), 0);
}

void PairCorrelator::add(std::uint64_t t_ps, unsigned channel) {
    if (channel > 1) throw config_error("channel must be 0 or 1");
    if (any_ && t_ps < last_t_)
        throw config_error("tags must be fed in non-decreasing time order");
    last_t_ = t_ps;
    if (!any_) {
        any_ = true;
        t_min_ = t_ps;
    }
    t_max_ = t_ps;
    ++totals_[channel];

    Ring& other = rings_[1 - channel];
    const std::int64_t t = static_cast<std::int64_t>(t_ps);
    // Keep only opposite-channel tags that can still form an in-span pair.
    // Incoming ch1 pairs as tau = t - a in [0, L): drop a <= t - L.
    // Incoming ch0 pairs as tau = b - t in [-L, 0]: drop b < t - L.
    if (channel == 1) {
        while (!other.empty() &&
               static_cast<std::int64_t>(other.front()) <= t - span_ps_)
            other.pop_front();
    } else {
        while (!other.empty() &&
               static_cast<std::int64_t>(other.front()) < t - span_ps_)
            other.pop_front();
    }
    const std::size_t n = other.count;
    const std::size_t cap_mask = other.buf.empty() ? 0 : other.buf.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t tp =
            static_cast<std::int64_t>(other.buf[(other.head + i) & cap_mask]);
        std::int64_t tau = (channel == 1) ? t - tp : tp - t;
        std::size_t bin =
            static_cast<std::size_t>(floor_div(tau, bw_) - first_bin_);
        ++counts_[bin];
    }
    rings_[channel].push(t_ps);
}

CorrelationHistogram PairCorrelator::finish() {
    CorrelationHistogram hist;
    hist.counts = std::move(counts_);
    hist.bin_width_ps = bw_;
    hist.first_bin = first_bin_;
    hist.total_tags = totals_;
    hist.wall_start_s = any_ ? static_cast<double>(t_min_) * s_per_ps : 0.0;
    hist.wall_end_s = any_ ? static_cast<double>(t_max_) * s_per_ps : 0.0;
    return hist;
}

CorrelationHistogram cross_correlate(const TimeTagStream& tags,
                                     const CorrelationConfig& config) {
    config.validate();
    PairCorrelator corr(config.bin_width_ps, config.max_lag_ps());
    for (const auto& tag : tags.tags) corr.add(tag.t_ps, tag.channel);
    return corr.finish();
}

CorrelationHistogram cross_correlate(const TimeTagStream& ch0,
                                     const TimeTagStream& ch1,
                                     const CorrelationConfig& config) {
    config.validate();
    PairCorrelator corr(config.bin_width_ps, config.max_lag_ps());
    std::size_t i = 0, j = 0;
    while (i < ch0.tags.size() || j < ch1.tags.size()) {
        bool take0 = j == ch1.tags.size() ||
                     (i < ch0.tags.size() && ch0.tags[i].t_ps <= ch1.tags[j].t_ps);
        if (take0) {
            corr.add(ch0.tags[i].t_ps, 0);
            ++i;
        } else {
            corr.add(ch1.tags[j].t_ps, 1);
            ++j;
        }
    }
    return corr.finish();
}

CorrelationHistogram cross_correlate_files(const std::string& path0,
                                           const std::string& path1,
                                           const CorrelationConfig& config) {
    config.validate();
    PairCorrelator corr(config.bin_width_ps, config.max_lag_ps());
    TagFileReader r0(path0);
    TagFileReader r1(path1);
    TimeTag a, b;
    bool ha = r0.next(a);
    bool hb = r1.next(b);
    while (ha || hb) {
        if (ha && (!hb || a.t_ps <= b.t_ps)) {
            corr.add(a.t_ps, a.channel);
            ha = r0.next(a);
        } else {
            corr.add(b.t_ps, b.channel);
            hb = r1.next(b);
        }
    }
    return corr.finish();
}

PeakAreas peak_areas(const CorrelationHistogram& hist, double period_ns,
                     int n_max, std::optional<double> halfwidth_ns) {
    if (!(period_ns > 0.0)) throw config_error("period must be > 0 ns");
    if (n_max < 1) throw config_error("n_max must be >= 1");
    const std::int64_t P =
        static_cast<std::int64_t>(std::llround(period_ns * ps_per_ns));
    double hw_ns = halfwidth_ns.value_or(0.5 * period_ns);
    if (!(hw_ns > 0.0) || hw_ns > 0.5 * period_ns + 1e-12)
        throw config_error("integration halfwidth must lie in (0, period/2]");
    // Doubled-ps units keep the window test exact for half-integer centers.
    const std::int64_t h2 =
        static_cast<std::int64_t>(std::llround(2.0 * hw_ns * ps_per_ns));

    const std::int64_t span = (hist.first_bin + static_cast<std::int64_t>(
                                                    hist.n_bins())) *
                              hist.bin_width_ps;
    if (2 * (static_cast<std::int64_t>(n_max) * P) + h2 > 2 * span)
        throw numerical_error(
            "histogram span is insufficient for the requested peak range");

    PeakAreas pa;
    pa.period_ns = period_ns;
    pa.integration_halfwidth_ns = hw_ns;
    std::map<int, double> sums;
    for (int n = -n_max; n <= n_max; ++n) sums[n] = 0.0;
    for (std::size_t j = 0; j < hist.n_bins(); ++j) {
        std::int64_t c2 =
            hist.bin_width_ps * (2 * (hist.first_bin + static_cast<std::int64_t>(j)) + 1);
        std::int64_t n = peak_index(c2, P);
        if (n < -n_max || n > n_max) continue;
        std::int64_t d2 = c2 - 2 * n * P;
        if (d2 > -h2 && d2 <= h2) sums[static_cast<int>(n)] += static_cast<double>(hist.counts[j]);
    }
    for (const auto& [n, area] : sums)
        pa.areas[n] = {area, std::sqrt(area)};
    return pa;
}

namespace {

template <typename NextTag>
VisibilitySeries sliding_impl(NextTag&& next_tag,
                              const CorrelationConfig& config, double period_ns,
                              int n_max,
                              std::optional<double> narrow_halfwidth_ns,
                              const WindowCallback& per_window) {
    config.validate();
    const std::int64_t bw = config.bin_width_ps;
    const std::int64_t L =
        (config.max_lag_ps() / bw + 1) * bw;
    const std::int64_t first_bin = -(L / bw);
    const std::size_t n_bins = static_cast<std::size_t>(-2 * first_bin);

    SlidingState st;
    st.step_ps =
        static_cast<std::int64_t>(std::llround(config.window_step_s * ps_per_s));
    st.n_buckets_per_window = static_cast<std::size_t>(
        std::llround(config.window_length_s / config.window_step_s));
    st.ring.assign(st.n_buckets_per_window, std::vector<std::uint64_t>(n_bins, 0));
    st.bucket.assign(n_bins, 0);
    st.window.assign(n_bins, 0);

    double narrow_hw =
        narrow_halfwidth_ns.value_or(static_cast<double>(bw) * ns_per_ps);

    VisibilitySeries series;
    auto emit_window = [&](std::int64_t last_bucket) {
        double start_s = static_cast<double>(last_bucket + 1 -
                                             static_cast<std::int64_t>(
                                                 st.n_buckets_per_window)) *
                         config.window_step_s;
        CorrelationHistogram win;
        win.counts = st.window;
        win.bin_width_ps = bw;
        win.first_bin = first_bin;
        auto wide = peak_areas(win, period_ns, n_max);
        auto narrow = peak_areas(win, period_ns, n_max, narrow_hw);
        VisibilityPoint pt;
        pt.window_start_s = start_s;
        pt.estimate = visibility_from_areas(wide, {-1, 1}, &narrow);
        series.push_back(pt);
        if (per_window) per_window(start_s, win);
    };

    auto finalize_bucket = [&](std::int64_t b) {
        // Slide the ring: drop the bucket leaving the window, admit b.
        auto& slot = st.ring[st.ring_pos];
        for (std::size_t j = 0; j < n_bins; ++j) {
            st.window[j] += st.bucket[j] - slot[j];
            slot[j] = st.bucket[j];
            st.bucket[j] = 0;
        }
        st.ring_pos = (st.ring_pos + 1) % st.n_buckets_per_window;
        if (b + 1 >= static_cast<std::int64_t>(st.n_buckets_per_window))
            emit_window(b);
    };

    // Pair production mirrors PairCorrelator, with the pair binned into the
    // bucket of its earlier tag.
    std::array<std::vector<std::uint64_t>, 2> bufs;  // simple deques
    std::array<std::size_t, 2> heads = {0, 0};
    bool any = false;
    std::uint64_t t0 = 0, t_last = 0;

    TimeTag tag;
    while (next_tag(tag)) {
        if (tag.channel > 1) throw config_error("channel must be 0 or 1");
        if (any && tag.t_ps < t_last)
            throw config_error("tags must be fed in non-decreasing time order");
        if (!any) {
            any = true;
            t0 = tag.t_ps;
        }
        t_last = tag.t_ps;
        const std::int64_t t = static_cast<std::int64_t>(tag.t_ps);
        const std::int64_t rel = t - static_cast<std::int64_t>(t0);

        // Buckets older than (t - L) can no longer receive pairs.
        std::int64_t safe_bucket = floor_div(rel - L, st.step_ps);
        while (st.cur_bucket < safe_bucket) {
            finalize_bucket(st.cur_bucket);
            ++st.cur_bucket;
        }

        unsigned ch = tag.channel;
        auto& other = bufs[1 - ch];
        auto& oh = heads[1 - ch];
        if (ch == 1) {
            while (oh < other.size() &&
                   static_cast<std::int64_t>(other[oh]) <= t - L)
                ++oh;
        } else {
            while (oh < other.size() &&
                   static_cast<std::int64_t>(other[oh]) < t - L)
                ++oh;
        }
        if (oh > 4096 && oh * 2 > other.size()) {
            other.erase(other.begin(), other.begin() + static_cast<std::ptrdiff_t>(oh));
            oh = 0;
        }
        for (std::size_t i = oh; i < other.size(); ++i) {
            std::int64_t tp = static_cast<std::int64_t>(other[i]);
            std::int64_t tau = (ch == 1) ? t - tp : tp - t;
            std::int64_t min_rel =
                std::min(tp, t) - static_cast<std::int64_t>(t0);
            std::int64_t b = floor_div(min_rel, st.step_ps);
            std::size_t bin = static_cast<std::size_t>(floor_div(tau, bw) - first_bin);
            if (b == st.cur_bucket) {
                ++st.bucket[bin];
            } else {
                // Earlier tag sits in an already-open (not yet finalized)
                // bucket ahead of cur_bucket; finalize up to it.
                while (st.cur_bucket < b) {
                    finalize_bucket(st.cur_bucket);
                    ++st.cur_bucket;
                }
                ++st.bucket[bin];
            }
        }
        bufs[ch].push_back(tag.t_ps);
    }

    if (any) {
        // Complete buckets fully covered by data: k with (k+1)*step <= span.
        std::int64_t span = static_cast<std::int64_t>(t_last - t0);
        std::int64_t n_complete = floor_div(span, st.step_ps);
        while (st.cur_bucket < n_complete) {
            finalize_bucket(st.cur_bucket);
            ++st.cur_bucket;
        }
    }
    return series;
}

}  // namespace

VisibilitySeries sliding_visibility(const TimeTagStream& tags,
                                    const CorrelationConfig& config,
                                    double period_ns, int n_max,
                                    std::optional<double> narrow_halfwidth_ns,
                                    const WindowCallback& per_window) {
    std::size_t i = 0;
    auto next = [&tags, &i](TimeTag& out) {
        if (i == tags.tags.size()) return false;
        out = tags.tags[i++];
        return true;
    };
    return sliding_impl(next, config, period_ns, n_max, narrow_halfwidth_ns,
                        per_window);
}

VisibilitySeries sliding_visibility_files(
    const std::string& path0, const std::string& path1,
    const CorrelationConfig& config, double period_ns, int n_max,
    std::optional<double> narrow_halfwidth_ns,
    const WindowCallback& per_window) {
    TagFileReader r0(path0);
    TagFileReader r1(path1);
    TimeTag a, b;
    bool ha = r0.next(a);
    bool hb = r1.next(b);
    auto next = [&](TimeTag& out) {
        if (!ha && !hb) return false;
        if (ha && (!hb || a.t_ps <= b.t_ps)) {
            out = a;
            ha = r0.next(a);
        } else {
            out = b;
            hb = r1.next(b);
        }
        return true;
    };
    return sliding_impl(next, config, period_ns, n_max, narrow_halfwidth_ns,
                        per_window);
}

}  // namespace homsim
