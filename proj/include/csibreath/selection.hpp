#pragma once

// Collapse many preprocessed subcarrier signals into one respiratory waveform:
//  - reference-guided: per window, the channel with the strongest |r| against
//    the reference, z-normalized and sign-corrected;
//  - PCA: per window, the projection on the first principal axis.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "csibreath/dsp.hpp"
#include "csibreath/linalg.hpp"
#include "csibreath/types.hpp"

namespace csibreath {

enum class ExtractionMethod { correlation, pca };

inline const char* to_string(ExtractionMethod m) { return m == ExtractionMethod::correlation ? "correlation" : "pca"; }

inline ExtractionMethod parse_method(const std::string& s) {
    if (s == "correlation") return ExtractionMethod::correlation;
    if (s == "pca") return ExtractionMethod::pca;
    throw std::invalid_argument("unknown method '" + s + "'");
}

struct WindowSpan {
    std::size_t start = 0;
    std::size_t length = 0;
    bool operator==(const WindowSpan&) const = default;
};

/// Consecutive non-overlapping windows of `window` samples. A trailing
/// remainder shorter than half a window is merged into the previous window.
inline std::vector<WindowSpan> partition_windows(std::size_t n, std::size_t window) {
    if (window == 0) throw std::invalid_argument("window must be positive");
    std::vector<WindowSpan> out;
    if (n == 0) return out;
    const std::size_t full = n / window;
    const std::size_t rem = n % window;
    if (full == 0) return {{0, n}};
    for (std::size_t k = 0; k < full; ++k) out.push_back({k * window, window});
    if (rem > 0) {
        if (2 * rem >= window) out.push_back({full * window, rem});
        else out.back().length += rem;
    }
    return out;
}

struct WindowDescriptor {
    WindowSpan span;
    double start_time = 0.0;
    // correlation method
    std::size_t channel = 0;
    double correlation = 0.0;
    // pca method
    std::vector<double> loading;
    double explained_variance = 0.0;
    bool degenerate = false;

    bool operator==(const WindowDescriptor&) const = default;
};

struct ExtractionResult {
    UniformSeries signal;
    ExtractionMethod method = ExtractionMethod::pca;
    double window = 30.0;
    std::vector<WindowDescriptor> per_window;

    bool operator==(const ExtractionResult&) const = default;
};

namespace detail {

inline double mean_product(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc / static_cast<double>(a.size());
}

inline std::size_t window_samples(double seconds, double rate, std::size_t minimum, const char* what) {
    const auto w = static_cast<long>(std::lround(seconds * rate));
    if (w < static_cast<long>(minimum))
        throw std::invalid_argument(std::string(what) + " window must span at least " + std::to_string(minimum) + " samples");
    return static_cast<std::size_t>(w);
}

}  // namespace detail

inline ExtractionResult select_by_correlation(const ChannelSet& channels, const UniformSeries& ref, double window = 10.0) {
    if (channels.channel_count() == 0) throw std::invalid_argument("no channels to select from");
    const std::size_t n = channels.samples();
    if (ref.size() != n || std::abs(ref.rate - channels.rate) > 1e-9 * channels.rate ||
        std::abs(ref.start_time - channels.start_time) > 1e-6)
        throw std::invalid_argument("reference is not on the channels' time grid");
    const auto w = detail::window_samples(window, channels.rate, 2, "selection");

    ExtractionResult res;
    res.method = ExtractionMethod::correlation;
    res.window = window;
    res.signal = {std::vector<double>(n, 0.0), channels.rate, channels.start_time};
    for (const auto& span : partition_windows(n, w)) {
        std::span<const double> ref_seg(ref.samples.data() + span.start, span.length);
        bool ref_degenerate = false;
        const auto zr = znormalize_samples(ref_seg, &ref_degenerate);

        WindowDescriptor d;
        d.span = span;
        d.start_time = channels.start_time + static_cast<double>(span.start) / channels.rate;
        d.degenerate = ref_degenerate;
        std::vector<double> best_seg;
        double best_abs = -1.0;
        if (!ref_degenerate) {
            for (std::size_t k = 0; k < channels.channel_count(); ++k) {
                std::span<const double> seg(channels.channels[k].data() + span.start, span.length);
                bool degen = false;
                auto zc = znormalize_samples(seg, &degen);
                if (degen) continue;
                const double r = std::clamp(detail::mean_product(zc, zr), -1.0, 1.0);
                if (std::abs(r) > best_abs) {
                    best_abs = std::abs(r);
                    d.channel = k;
                    d.correlation = r;
                    best_seg = std::move(zc);
                }
            }
        }
        if (best_seg.empty()) d.degenerate = true;
        else {
            const double sign = d.correlation < 0 ? -1.0 : 1.0;
            for (std::size_t i = 0; i < span.length; ++i) res.signal.samples[span.start + i] = sign * best_seg[i];
        }
        res.per_window.push_back(std::move(d));
    }
    return res;
}

struct PcaWindow {
    std::vector<double> loading;     // unit-norm first principal axis
    std::vector<double> projection;  // centered data projected on `loading`
    SymmetricEigen axes;             // all components (eigenvalues = variances)
    std::vector<double> means;       // per-channel window means
    double explained_variance = 0.0;
    bool degenerate = false;
};

/// Principal axes of one (samples x channels) window after per-channel centering.
inline PcaWindow pca_window(const ChannelSet& channels, std::size_t start, std::size_t length) {
    const std::size_t m = channels.channel_count();
    if (length < 2) throw std::invalid_argument("PCA window needs at least 2 samples");
    if (start + length > channels.samples()) throw std::out_of_range("PCA window exceeds the series");

    PcaWindow out;
    Matrix centered(length, m);
    out.means.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& ch = channels.channels[k];
        double mean = 0.0;
        for (std::size_t i = 0; i < length; ++i) mean += ch[start + i];
        mean /= static_cast<double>(length);
        out.means[k] = mean;
        for (std::size_t i = 0; i < length; ++i) centered(i, k) = ch[start + i] - mean;
    }
    Matrix cov(m, m);
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = p; q < m; ++q) {
            double acc = 0.0;
            for (std::size_t i = 0; i < length; ++i) acc += centered(i, p) * centered(i, q);
            cov(p, q) = cov(q, p) = acc / static_cast<double>(length - 1);
        }
    double trace = 0.0;
    for (std::size_t k = 0; k < m; ++k) trace += cov(k, k);

    out.projection.assign(length, 0.0);
    if (!(trace > 1e-24)) {
        out.degenerate = true;
        out.loading.assign(m, 0.0);
        out.loading[0] = 1.0;
        out.axes.values.assign(m, 0.0);
        out.axes.vectors = Matrix(m, m);
        for (std::size_t k = 0; k < m; ++k) out.axes.vectors(k, k) = 1.0;
        return out;
    }
    out.axes = symmetric_eigen(cov);
    for (auto& v : out.axes.values) v = std::max(v, 0.0);
    out.loading = out.axes.vectors.column(0);
    out.explained_variance = std::clamp(out.axes.values[0] / trace, 0.0, 1.0);
    for (std::size_t i = 0; i < length; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += centered(i, k) * out.loading[k];
        out.projection[i] = acc;
    }
    return out;
}

/// Seconds of the previous window's output used to orient the next window.
inline constexpr double kPcaSignContinuitySeconds = 5.0;

inline ExtractionResult extract_pca(const ChannelSet& channels, double window = 30.0) {
    const std::size_t m = channels.channel_count();
    if (m == 0) throw std::invalid_argument("no channels for PCA");
    const std::size_t n = channels.samples();
    const auto w = detail::window_samples(window, channels.rate, 50, "PCA");
    const auto tail_len = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(kPcaSignContinuitySeconds * channels.rate)));

    ExtractionResult res;
    res.method = ExtractionMethod::pca;
    res.window = window;
    res.signal = {std::vector<double>(n, 0.0), channels.rate, channels.start_time};

    std::optional<WindowSpan> prev;
    std::vector<double> prev_loading;
    for (const auto& span : partition_windows(n, w)) {
        auto pw = pca_window(channels, span.start, span.length);
        WindowDescriptor d;
        d.span = span;
        d.start_time = channels.start_time + static_cast<double>(span.start) / channels.rate;
        d.degenerate = pw.degenerate;
        double sign = 1.0;
        if (!pw.degenerate) {
            bool oriented = false;
            if (prev) {
                // Project the previous window's tail on the new axis and compare with
                // what was emitted there.
                const std::size_t len = std::min(tail_len, prev->length);
                const std::size_t t0 = prev->start + prev->length - len;
                std::vector<double> q(len, 0.0), emitted(len);
                for (std::size_t k = 0; k < m; ++k) {
                    const auto& ch = channels.channels[k];
                    double mean = 0.0;
                    for (std::size_t i = 0; i < len; ++i) mean += ch[t0 + i];
                    mean /= static_cast<double>(len);
                    for (std::size_t i = 0; i < len; ++i) q[i] += (ch[t0 + i] - mean) * pw.loading[k];
                }
                for (std::size_t i = 0; i < len; ++i) emitted[i] = res.signal.samples[t0 + i];
                bool dq = false, de = false;
                const auto zq = znormalize_samples(q, &dq);
                const auto ze = znormalize_samples(emitted, &de);
                const double r = (dq || de) ? 0.0 : detail::mean_product(zq, ze);
                if (r != 0.0) {
                    sign = r < 0 ? -1.0 : 1.0;
                    oriented = true;
                } else {
                    double dot = 0.0;
                    for (std::size_t k = 0; k < m; ++k) dot += prev_loading[k] * pw.loading[k];
                    if (dot != 0.0) {
                        sign = dot < 0 ? -1.0 : 1.0;
                        oriented = true;
                    }
                }
            }
            if (!oriented) {
                const auto& p = pw.projection;
                const auto imax = std::max_element(p.begin(), p.end()) - p.begin();
                const auto imin = std::min_element(p.begin(), p.end()) - p.begin();
                sign = imax <= imin ? 1.0 : -1.0;
            }
            for (auto& v : pw.loading) v *= sign;
            for (std::size_t i = 0; i < span.length; ++i) res.signal.samples[span.start + i] = sign * pw.projection[i];
            prev = span;
            prev_loading = pw.loading;
        } else {
            prev.reset();
        }
        d.loading = std::move(pw.loading);
        d.explained_variance = pw.explained_variance;
        res.per_window.push_back(std::move(d));
    }
    return res;
}

}  // namespace csibreath
