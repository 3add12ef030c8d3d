#pragma once

// Output file sets: relative path -> exact bytes. The command-line tool writes
// these to disk; determinism checks compare them directly.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "csibreath/csi_io.hpp"
#include "csibreath/pipeline.hpp"
#include "csibreath/report.hpp"
#include "csibreath/synth.hpp"

namespace csibreath {

using FileSet = std::map<std::string, std::string>;

inline constexpr const char* kCsiSuffix = ".csi.csv";
inline constexpr const char* kCsiNdjsonSuffix = ".csi.ndjson";
inline constexpr const char* kRefSuffix = ".ref.csv";
inline constexpr const char* kTruthSuffix = ".truth.json";

/// Dataset layout: `<id>.csi.csv` (or `.csi.ndjson`), `<id>.ref.csv`, `<id>.truth.json`.
inline FileSet suite_files(const std::vector<SuiteRecord>& suite, CsiFormat format = CsiFormat::csv) {
    FileSet files;
    for (const auto& r : suite) {
        if (format == CsiFormat::csv)
            files[r.id + kCsiSuffix] = to_csv(r.data.record);
        else
            files[r.id + kCsiNdjsonSuffix] = to_ndjson(r.data.record);
        const auto& ref = r.data.truth.reference;
        files[r.id + kRefSuffix] = to_reference_csv({ref.samples(), ref.rate(), ref.start_time()});
        files[r.id + kTruthSuffix] = truth_json(r.spec, r.data.truth).dump(2) + "\n";
    }
    return files;
}

/// Per-record outputs under `records/`: extracted waveform, epoch counts,
/// extraction details and, when present, the aligned reference.
inline FileSet record_files(const RecordOutput& out, const std::string& id) {
    FileSet files;
    const std::string base = "records/" + id;
    files[base + ".waveform.csv"] = to_reference_csv(out.extraction.signal);
    files[base + ".epochs.csv"] = to_csv(out.result.epochs);
    files[base + ".extraction.json"] = extraction_json(out.extraction, id + ".waveform.csv").dump(2) + "\n";
    if (out.reference) files[base + ".reference.csv"] = to_reference_csv(*out.reference);
    return files;
}

enum class ReportFormat { json, text, csv };

/// `report.json`, `report.txt` (Table layout) and `histogram.csv`, as selected.
inline FileSet report_files(const ReportSet& rep, const std::vector<ReportFormat>& formats = {ReportFormat::json, ReportFormat::text,
                                                                                            ReportFormat::csv}) {
    FileSet files;
    for (auto f : formats) {
        if (f == ReportFormat::json) files["report.json"] = to_json_text(rep);
        if (f == ReportFormat::text) files["report.txt"] = render_text(rep);
        if (f == ReportFormat::csv) files["histogram.csv"] = histogram_csv(rep.histogram);
    }
    return files;
}

inline nlohmann::json config_json(const PipelineConfig& cfg) {
    const auto& f = cfg.filter;
    return {{"method", to_string(cfg.method)},
            {"filter",
             {{"hampel_window", f.hampel_window},
              {"hampel_threshold", f.hampel_threshold},
              {"target_rate", f.target_rate},
              {"ma_window", f.ma_window},
              {"bp_low", f.bp_low},
              {"bp_high", f.bp_high},
              {"bp_order", f.bp_order},
              {"phase_mode", f.phase_mode == PhaseMode::zero_phase ? "zero" : "causal"}}},
            {"selection_window", cfg.selection_window},
            {"pca_window", cfg.pca_window},
            {"detection",
             {{"min_separation", cfg.detection.min_separation},
              {"min_prominence", cfg.detection.min_prominence},
              {"refine_half_window", cfg.detection.refine_half_window}}},
            {"epoch_length", cfg.epoch_length},
            {"max_lag", cfg.max_lag},
            {"correlation_window", cfg.correlation_window}};
}

/// Writes every file under `dir`, each one atomically.
inline void write_files(const std::filesystem::path& dir, const FileSet& files) {
    for (const auto& [name, content] : files) atomic_write(dir / name, content);
}

}  // namespace csibreath
