#pragma once

// End-to-end processing of one record: preprocessing, extraction, optional
// reference alignment, cycle detection and comparison.

#include <optional>
#include <string>

#include "csibreath/evaluation.hpp"
#include "csibreath/preprocess.hpp"
#include "csibreath/report.hpp"
#include "csibreath/respiration.hpp"
#include "csibreath/selection.hpp"

namespace csibreath {

struct PipelineConfig {
    FilterSpec filter;
    ExtractionMethod method = ExtractionMethod::pca;
    double selection_window = 10.0;  // s, correlation method
    double pca_window = 30.0;        // s
    DetectionParams detection;
    double epoch_length = 30.0;        // s
    double max_lag = 10.0;             // s; 0 disables alignment
    double correlation_window = 10.0;  // s

    void validate() const {
        filter.validate();
        if (!(epoch_length > 0.0)) throw std::invalid_argument("epoch length must be positive");
        if (max_lag < 0.0) throw std::invalid_argument("max lag must be non-negative");
        if (!(selection_window > 0.0) || !(pca_window > 0.0) || !(correlation_window > 0.0))
            throw std::invalid_argument("window lengths must be positive");
    }
};

struct RecordOutput {
    ExtractionResult extraction;
    std::optional<UniformSeries> reference;  // preprocessed, aligned onto the signal grid
    TurningPoints points;
    RecordResult result;
};

/// Negates a PCA waveform and its loadings when it anti-correlates with the
/// reference; component polarity is otherwise arbitrary.
inline void orient_to_reference(ExtractionResult& res, const UniformSeries& ref) {
    const auto r = pearson(res.signal.samples, ref.samples);
    if (!r || *r >= 0.0) return;
    for (auto& v : res.signal.samples) v = -v;
    for (auto& d : res.per_window)
        for (auto& l : d.loading) l = -l;
}

inline RecordOutput process_record(const CsiRecord& record, const std::optional<ReferenceTrace>& reference,
                                   const PipelineConfig& cfg, const std::string& record_id = "record") {
    cfg.validate();
    if (cfg.method == ExtractionMethod::correlation && !reference)
        throw std::invalid_argument("correlation method requires a reference trace");

    const ChannelSet channels = preprocess_subcarriers(record, cfg.filter);
    const std::size_t n = channels.samples();

    RecordOutput out;
    std::optional<ExtractionResult> pca;
    if (cfg.method == ExtractionMethod::pca || (reference && cfg.max_lag > 0.0))
        pca = extract_pca(channels, cfg.pca_window);

    double lag = 0.0;
    if (reference) {
        const auto ref60 = preprocess_reference(*reference, cfg.filter);
        auto on_grid = sample_on_grid(ref60, channels.start_time, channels.rate, n);
        if (cfg.max_lag > 0.0) {
            lag = align(on_grid, pca->signal, cfg.max_lag, true);
            on_grid = sample_on_grid(ref60, channels.start_time, channels.rate, n, lag);
        }
        out.reference = std::move(on_grid);
    }

    out.extraction = cfg.method == ExtractionMethod::pca ? std::move(*pca)
                                                         : select_by_correlation(channels, *out.reference, cfg.selection_window);
    if (cfg.method == ExtractionMethod::pca && out.reference) orient_to_reference(out.extraction, *out.reference);

    out.points = detect_turning_points(out.extraction.signal, cfg.detection);
    const auto grid = EpochGrid::tiling(out.extraction.signal, cfg.epoch_length);
    out.result.record_id = record_id;
    out.result.subject = record.meta().subject;
    out.result.posture = record.meta().posture;
    out.result.method = to_string(cfg.method);
    out.result.epochs = count_cycles(out.points, grid);

    if (out.reference) {
        const auto ref_points = detect_turning_points(*out.reference, cfg.detection);
        const auto ref_epochs = count_cycles(ref_points, grid);
        const auto corr = windowed_mean_correlation(out.extraction.signal, *out.reference, cfg.correlation_window);
        out.result.comparison = compare_counts(integer_counts(ref_epochs), integer_counts(out.result.epochs), corr, lag);
    }
    return out;
}

inline nlohmann::json extraction_json(const ExtractionResult& res, const std::string& waveform_file) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& d : res.per_window) {
        nlohmann::json w = {{"start", d.start_time},
                            {"start_index", d.span.start},
                            {"length", d.span.length},
                            {"degenerate", d.degenerate}};
        if (res.method == ExtractionMethod::correlation) {
            w["channel"] = d.channel;
            w["correlation"] = d.correlation;
        } else {
            w["loading"] = d.loading;
            w["explained_variance"] = d.explained_variance;
        }
        windows.push_back(std::move(w));
    }
    return {{"method", to_string(res.method)},
            {"window", res.window},
            {"rate", res.signal.rate},
            {"start_time", res.signal.start_time},
            {"waveform", waveform_file},
            {"windows", windows}};
}

}  // namespace csibreath
