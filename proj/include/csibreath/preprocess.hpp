#pragma once

#include "csibreath/butterworth.hpp"
#include "csibreath/csi_io.hpp"
#include "csibreath/dsp.hpp"

namespace csibreath {

/// magnitude -> Hampel -> linear resampling -> moving average -> band-pass,
/// independently per subcarrier. Hampel runs on the raw frames with its
/// window sized at the record's nominal rate.
inline ChannelSet preprocess_subcarriers(const CsiRecord& record, const FilterSpec& spec) {
    spec.validate();
    const auto mags = magnitudes(record);
    const auto t = record.timestamps();
    const auto hampel_hw = hampel_half_width(spec.hampel_window, record.nominal_rate());
    const auto ma_len = moving_average_length(spec.ma_window, spec.target_rate);
    const BandpassFilter bp(spec);

    ChannelSet out;
    out.rate = spec.target_rate;
    out.start_time = t.front();
    out.channels.reserve(record.subcarriers());
    for (std::size_t k = 0; k < record.subcarriers(); ++k) {
        const auto raw = mags.column(k);
        const auto cleaned = hampel_samples(raw, hampel_hw, spec.hampel_threshold);
        auto uniform = resample_linear(t, cleaned, spec.target_rate);
        const auto smoothed = moving_average_samples(uniform.samples, ma_len);
        out.channels.push_back(spec.phase_mode == PhaseMode::zero_phase ? bp.filtfilt(smoothed) : bp.filter(smoothed));
    }
    return out;
}

/// Belt path: resample to the target rate and band-pass in the same range.
inline UniformSeries preprocess_reference(const ReferenceTrace& ref, const FilterSpec& spec) {
    spec.validate();
    auto uniform = resample_linear(ref.timestamps(), ref.samples(), spec.target_rate);
    return butterworth_bandpass(uniform, spec);
}

/// Values of `s` at the grid times t_i - lag, by linear interpolation; times
/// outside the series hold the nearest edge value.
inline UniformSeries sample_on_grid(const UniformSeries& s, double grid_start, double grid_rate, std::size_t n,
                                    double lag = 0.0) {
    UniformSeries out{std::vector<double>(n), grid_rate, grid_start};
    const double last = static_cast<double>(s.size() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid_start + static_cast<double>(i) / grid_rate - lag;
        const double pos = std::clamp((t - s.start_time) * s.rate, 0.0, last);
        const auto j = std::min(static_cast<std::size_t>(pos), s.size() - 2);
        const double frac = pos - static_cast<double>(j);
        out.samples[i] = s.samples[j] + frac * (s.samples[j + 1] - s.samples[j]);
    }
    return out;
}

}  // namespace csibreath
