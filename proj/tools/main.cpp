// csibreath: synthesize CSI datasets, run the respiration pipeline, render
// spectrograms and re-render reports.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "csibreath/artifacts.hpp"
#include "csibreath/csi_io.hpp"
#include "csibreath/pipeline.hpp"
#include "csibreath/report.hpp"
#include "csibreath/spectrogram.hpp"
#include "csibreath/synth.hpp"
#include "digest.hpp"
#include "png.hpp"

namespace fs = std::filesystem;
using namespace csibreath;

namespace {

enum Exit { ok = 0, usage = 1, data = 2, internal = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("CSIBREATH_OUT"); env && *env) return env;
    return "csibreath-out";
}

/// Runs job(i) for i in [0, n) on up to `jobs` threads. The first exception is
/// rethrown after all workers stop.
template <class Job>
void parallel_for(std::size_t n, unsigned jobs, Job job) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

nlohmann::json hashes(const FileSet& files) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, content] : files) out[name] = sha256_hex(content);
    return out;
}

std::string manifest(const std::string& command, nlohmann::json config, nlohmann::json inputs, const FileSet& outputs) {
    return nlohmann::json{{"manifest", "csibreath/1"},
                          {"command", command},
                          {"config", std::move(config)},
                          {"inputs", std::move(inputs)},
                          {"outputs", hashes(outputs)}}
               .dump(2) +
           "\n";
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
    std::string suite = "default";
    std::uint64_t seed = 7;
    int subjects = 5;
    std::vector<std::string> postures{"supine", "side", "prone"};
    double snr_db = 20.0;
    double duration = 300.0;
    std::string format = "csv";
    bool complex = false;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    if (a.suite != "default") throw UsageError("unknown suite '" + a.suite + "' (available: default)");
    auto profiles = default_profiles();
    if (a.subjects < 1 || a.subjects > static_cast<int>(profiles.size()))
        throw UsageError("--subjects must be between 1 and " + std::to_string(profiles.size()));
    profiles.resize(static_cast<std::size_t>(a.subjects));

    SuiteOptions opt;
    opt.seed = a.seed;
    opt.noise_snr_db = a.snr_db;
    opt.duration = a.duration;
    opt.complex_output = a.complex;
    opt.postures.clear();
    for (const auto& p : a.postures) {
        Posture posture = Posture::unknown;
        try {
            posture = parse_posture(p);
        } catch (const std::exception&) {
        }
        if (posture == Posture::unknown) throw UsageError("--postures accepts supine, side, prone");
        opt.postures.push_back(posture);
    }
    if (!(opt.duration > 0.0)) throw UsageError("--duration must be positive");

    const auto suite = subject_suite(profiles, opt);
    const auto files = suite_files(suite, a.format == "ndjson" ? CsiFormat::ndjson : CsiFormat::csv);
    const fs::path dir = output_dir(a.out);
    write_files(dir, files);

    nlohmann::json config = {{"suite", a.suite},     {"seed", a.seed},         {"subjects", a.subjects}, {"postures", a.postures},
                             {"snr_db", a.snr_db},   {"duration", a.duration}, {"format", a.format},     {"complex", a.complex}};
    atomic_write(dir / "manifest.json", manifest("synth", config, nlohmann::json::object(), files));
    std::cout << "wrote " << suite.size() << " records to " << dir.string() << "\n";
    return Exit::ok;
}

// ---- run ---------------------------------------------------------------------

struct RunArgs {
    std::vector<std::string> inputs;
    std::string ref;
    std::string method = "pca";
    double epoch = 30.0;
    double bp_low = 0.2, bp_high = 0.4;
    int bp_order = 4;
    double hampel_window = 1.0, hampel_threshold = 1.7;
    double ma_window = 1.5;
    double rate = 60.0;
    std::string phase = "zero";
    double max_lag = 10.0;
    double min_separation = 1.2, min_prominence = 0.2;
    std::vector<std::string> formats{"json", "text", "csv"};
    unsigned jobs = 1;
    std::string out;
};

struct InputRecord {
    std::string id;
    fs::path csi;
    std::optional<fs::path> ref;
};

std::optional<std::string> record_id(const fs::path& p) {
    const std::string name = p.filename().string();
    for (const std::string suffix : {kCsiSuffix, kCsiNdjsonSuffix})
        if (name.size() > suffix.size() && name.ends_with(suffix)) return name.substr(0, name.size() - suffix.size());
    return std::nullopt;
}

std::vector<InputRecord> discover(const RunArgs& a) {
    std::vector<InputRecord> out;
    for (const auto& in : a.inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && record_id(e.path())) found.push_back(e.path());
            std::sort(found.begin(), found.end());
            if (found.empty()) throw DataError(p.string() + ": no *.csi.csv or *.csi.ndjson files");
            for (const auto& f : found) {
                const auto id = *record_id(f);
                const auto ref = f.parent_path() / (id + kRefSuffix);
                out.push_back({id, f, fs::exists(ref) ? std::optional(ref) : std::nullopt});
            }
        } else if (fs::is_regular_file(p)) {
            const auto id = record_id(p).value_or(p.stem().string());
            const auto ref = p.parent_path() / (id + kRefSuffix);
            out.push_back({id, p, fs::exists(ref) ? std::optional(ref) : std::nullopt});
        } else {
            throw DataError(p.string() + ": no such file or directory");
        }
    }
    if (!a.ref.empty()) {
        if (out.size() != 1) throw UsageError("--ref applies to a single CSI input");
        out[0].ref = fs::path(a.ref);
    }
    std::vector<std::string> ids;
    for (const auto& r : out) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw UsageError("duplicate record ids among inputs");
    return out;
}

PipelineConfig pipeline_config(const RunArgs& a) {
    PipelineConfig cfg;
    cfg.method = parse_method(a.method);
    cfg.epoch_length = a.epoch;
    cfg.filter.bp_low = a.bp_low;
    cfg.filter.bp_high = a.bp_high;
    cfg.filter.bp_order = a.bp_order;
    cfg.filter.hampel_window = a.hampel_window;
    cfg.filter.hampel_threshold = a.hampel_threshold;
    cfg.filter.ma_window = a.ma_window;
    cfg.filter.target_rate = a.rate;
    cfg.filter.phase_mode = a.phase == "causal" ? PhaseMode::causal : PhaseMode::zero_phase;
    cfg.max_lag = a.max_lag;
    cfg.detection.min_separation = a.min_separation;
    cfg.detection.min_prominence = a.min_prominence;
    try {
        cfg.validate();
        BandpassFilter check(cfg.filter);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

int cmd_run(const RunArgs& a) {
    const PipelineConfig cfg = pipeline_config(a);
    const auto inputs = discover(a);
    if (cfg.method == ExtractionMethod::correlation) {
        std::string missing;
        for (const auto& r : inputs)
            if (!r.ref) missing += (missing.empty() ? "" : ", ") + r.id;
        if (!missing.empty()) throw UsageError("method 'correlation' needs a reference trace (--ref); missing for: " + missing);
    }

    struct Slot {
        std::optional<RecordOutput> output;
        std::string error;
        std::string csi_hash, ref_hash;
    };
    std::vector<Slot> slots(inputs.size());
    parallel_for(inputs.size(), a.jobs, [&](std::size_t i) {
        const auto& in = inputs[i];
        auto& slot = slots[i];
        try {
            const auto csi_text = detail::read_file(in.csi);
            slot.csi_hash = sha256_hex(csi_text);
            CsiRecord record = [&] {
                try {
                    return format_from_path(in.csi) == CsiFormat::csv ? parse_csi_csv(csi_text) : parse_csi_ndjson(csi_text);
                } catch (const DataError& e) {
                    throw DataError(in.csi.string() + ": " + e.what());
                }
            }();
            std::optional<ReferenceTrace> ref;
            if (in.ref) {
                const auto ref_text = detail::read_file(*in.ref);
                slot.ref_hash = sha256_hex(ref_text);
                try {
                    ref = parse_reference_csv(ref_text);
                } catch (const DataError& e) {
                    throw DataError(in.ref->string() + ": " + e.what());
                }
            }
            slot.output = process_record(record, ref, cfg, in.id);
        } catch (const std::exception& e) {
            slot.error = in.id + ": " + e.what();
        }
    });

    FileSet files;
    std::vector<RecordResult> results;
    nlohmann::json input_hashes = nlohmann::json::object();
    int failed = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto& slot = slots[i];
        if (!slot.csi_hash.empty()) input_hashes[inputs[i].csi.generic_string()] = slot.csi_hash;
        if (!slot.ref_hash.empty()) input_hashes[inputs[i].ref->generic_string()] = slot.ref_hash;
        if (!slot.output) {
            std::cerr << "error: " << slot.error << "\n";
            ++failed;
            continue;
        }
        files.merge(record_files(*slot.output, inputs[i].id));
        results.push_back(std::move(slot.output->result));
    }

    const fs::path dir = output_dir(a.out);
    if (!results.empty()) {
        std::vector<ReportFormat> formats;
        for (const auto& f : a.formats)
            formats.push_back(f == "json" ? ReportFormat::json : f == "text" ? ReportFormat::text : ReportFormat::csv);
        const auto rep = build_report(std::move(results));
        files.merge(report_files(rep, formats));
        if (rep.mad) std::cout << "MAD " << text::format_fixed(*rep.mad, 2) << " breaths/epoch";
        if (rep.mean_correlation) std::cout << ", mean r " << text::format_fixed(*rep.mean_correlation, 3);
        if (rep.mad || rep.mean_correlation) std::cout << "\n";
    }
    write_files(dir, files);
    nlohmann::json config = config_json(cfg);
    config["formats"] = a.formats;
    atomic_write(dir / "manifest.json", manifest("run", config, input_hashes, files));
    std::cout << "processed " << inputs.size() - static_cast<std::size_t>(failed) << " of " << inputs.size() << " records into "
              << dir.string() << "\n";
    return failed ? Exit::data : Exit::ok;
}

// ---- spectrogram -------------------------------------------------------------

struct SpectrogramArgs {
    std::vector<std::string> inputs;
    double window = 30.0;
    double overlap = 0.5;
    double max_freq = 1.0;
    std::string out;
};

// Dark-to-bright ramp through blue, magenta and yellow.
void heat(double v, std::uint8_t rgb[3]) {
    static constexpr double stops[][3] = {{0, 0, 4}, {60, 15, 110}, {180, 55, 120}, {250, 140, 40}, {252, 255, 164}};
    v = std::clamp(v, 0.0, 1.0) * 4.0;
    const auto i = std::min(3, static_cast<int>(v));
    const double t = v - i;
    for (int c = 0; c < 3; ++c) rgb[c] = static_cast<std::uint8_t>(std::lround(stops[i][c] + t * (stops[i + 1][c] - stops[i][c])));
}

int cmd_spectrogram(const SpectrogramArgs& a) {
    if (!(a.max_freq > 0.0)) throw UsageError("--max-freq must be positive");
    std::vector<std::string> stems;
    std::vector<Spectrogram> specs;
    FileSet files;
    for (const auto& in : a.inputs) {
        const fs::path p(in);
        const auto ref = load_reference(p);
        Spectrogram s;
        try {
            s = spectrogram({ref.samples(), ref.rate(), ref.start_time()}, a.window, a.overlap);
        } catch (const std::invalid_argument& e) {
            throw DataError(p.string() + ": " + e.what());
        }
        std::string stem = p.filename().string();
        if (stem.ends_with(".csv")) stem.resize(stem.size() - 4);
        if (std::find(stems.begin(), stems.end(), stem) != stems.end()) stem += "_" + std::to_string(stems.size() + 1);
        files[stem + ".spectrogram.csv"] = to_csv(s);
        stems.push_back(stem);
        specs.push_back(std::move(s));
    }

    // Panels side by side, low frequencies at the bottom; every panel shares the
    // frequency rows up to max_freq so rows line up across panels.
    std::size_t rows = 0, frames = 0;
    for (const auto& s : specs) {
        std::size_t r = 0;
        while (r < s.frequencies.size() && s.frequencies[r] <= a.max_freq + 1e-12) ++r;
        rows = std::max(rows, r);
        frames = std::max(frames, s.times.size());
    }
    const std::uint32_t cell_h = static_cast<std::uint32_t>(std::max<std::size_t>(1, 320 / std::max<std::size_t>(rows, 1)));
    const std::uint32_t cell_w = static_cast<std::uint32_t>(std::max<std::size_t>(1, 480 / std::max<std::size_t>(frames, 1)));
    const std::uint32_t gap = 12;
    std::uint32_t width = 0;
    for (const auto& s : specs) width += static_cast<std::uint32_t>(s.times.size()) * cell_w + gap;
    width -= gap;
    png::Image img(width, static_cast<std::uint32_t>(rows) * cell_h);
    std::uint32_t x0 = 0;
    for (const auto& s : specs) {
        double peak = 0.0;
        for (std::size_t f = 0; f < s.times.size(); ++f)
            for (std::size_t b = 0; b < std::min(rows, s.frequencies.size()); ++b) peak = std::max(peak, s.magnitude(f, b));
        for (std::size_t f = 0; f < s.times.size(); ++f)
            for (std::size_t b = 0; b < std::min(rows, s.frequencies.size()); ++b) {
                std::uint8_t c[3];
                heat(peak > 0.0 ? s.magnitude(f, b) / peak : 0.0, c);
                for (std::uint32_t dy = 0; dy < cell_h; ++dy)
                    for (std::uint32_t dx = 0; dx < cell_w; ++dx)
                        img.set(x0 + static_cast<std::uint32_t>(f) * cell_w + dx,
                                static_cast<std::uint32_t>(rows - 1 - b) * cell_h + dy, c[0], c[1], c[2]);
            }
        x0 += static_cast<std::uint32_t>(s.times.size()) * cell_w + gap;
    }
    files["spectrogram.png"] = png::encode(img);

    const fs::path dir = output_dir(a.out);
    write_files(dir, files);
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& in : a.inputs) inputs[fs::path(in).generic_string()] = sha256_hex(detail::read_file(in));
    const nlohmann::json config = {{"window", a.window}, {"overlap", a.overlap}, {"max_freq", a.max_freq}, {"panels", stems}};
    atomic_write(dir / "manifest.json", manifest("spectrogram", config, inputs, files));
    std::cout << "wrote " << specs.size() << " spectrogram panel(s) to " << dir.string() << "\n";
    return Exit::ok;
}

// ---- report ------------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string format = "text";
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<RecordResult> records;
    for (const auto& in : a.inputs) {
        fs::path p(in);
        if (fs::is_directory(p)) p /= "report.json";
        if (!fs::exists(p)) throw DataError(p.string() + ": no such file");
        ReportSet rep;
        try {
            rep = report_from_json_text(detail::read_file(p));
        } catch (const std::exception& e) {
            throw DataError(p.string() + ": " + e.what());
        }
        for (auto& r : rep.records) records.push_back(std::move(r));
    }
    // Pooled tables are only meaningful for one method with each record counted once.
    std::set<std::string> methods, ids;
    for (const auto& r : records) {
        methods.insert(r.method);
        if (!ids.insert(r.record_id).second) throw UsageError("record " + r.record_id + " appears in more than one input");
    }
    if (methods.size() > 1) throw UsageError("inputs mix extraction methods; merge runs of a single method");
    const auto rep = build_report(std::move(records));
    if (!a.out.empty()) {
        write_files(a.out, report_files(rep));
        std::cout << "wrote report to " << a.out << "\n";
        return Exit::ok;
    }
    if (a.format == "json")
        std::cout << to_json_text(rep);
    else if (a.format == "csv")
        std::cout << histogram_csv(rep.histogram);
    else
        std::cout << render_text(rep);
    return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Respiration monitoring from Wi-Fi channel state information"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "csibreath 0.1.0");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a synthetic subject suite with ground truth");
    synth->add_option("--suite", sa.suite, "suite name")->capture_default_str();
    synth->add_option("--seed", sa.seed, "random seed")->capture_default_str();
    synth->add_option("--subjects", sa.subjects, "number of subjects (1-5)")->capture_default_str();
    synth->add_option("--postures", sa.postures, "postures to record")->delimiter(',')->capture_default_str();
    synth->add_option("--snr", sa.snr_db, "per-subcarrier SNR, dB")->capture_default_str();
    synth->add_option("--duration", sa.duration, "seconds per record")->capture_default_str();
    synth->add_option("--format", sa.format, "CSI file format")->check(CLI::IsMember({"csv", "ndjson"}))->capture_default_str();
    synth->add_flag("--complex", sa.complex, "write complex CSI instead of magnitudes");
    synth->add_option("--out", sa.out, "output directory (default $CSIBREATH_OUT or ./csibreath-out)");

    RunArgs ra;
    auto* run = app.add_subcommand("run", "run the pipeline over CSI files or dataset directories");
    run->add_option("inputs", ra.inputs, "CSI files or directories")->required();
    run->add_option("--ref", ra.ref, "reference trace for a single CSI input");
    run->add_option("--method", ra.method, "extraction method")->check(CLI::IsMember({"pca", "correlation"}))->capture_default_str();
    run->add_option("--epoch", ra.epoch, "epoch length, s")->capture_default_str();
    run->add_option("--bp-low", ra.bp_low, "band-pass low edge, Hz")->capture_default_str();
    run->add_option("--bp-high", ra.bp_high, "band-pass high edge, Hz")->capture_default_str();
    run->add_option("--bp-order", ra.bp_order, "band-pass order")->capture_default_str();
    run->add_option("--hampel-window", ra.hampel_window, "Hampel window, s")->capture_default_str();
    run->add_option("--hampel-threshold", ra.hampel_threshold, "Hampel threshold, scaled MADs")->capture_default_str();
    run->add_option("--ma-window", ra.ma_window, "moving-average window, s")->capture_default_str();
    run->add_option("--rate", ra.rate, "resampling rate, Hz")->capture_default_str();
    run->add_option("--phase", ra.phase, "band-pass phase mode")->check(CLI::IsMember({"zero", "causal"}))->capture_default_str();
    run->add_option("--max-lag", ra.max_lag, "reference alignment search range, s (0 disables)")->capture_default_str();
    run->add_option("--min-separation", ra.min_separation, "minimum peak spacing, s")->capture_default_str();
    run->add_option("--min-prominence", ra.min_prominence, "minimum peak prominence, fraction")->capture_default_str();
    run->add_option("--format", ra.formats, "report formats")
        ->delimiter(',')
        ->check(CLI::IsMember({"json", "text", "csv"}))
        ->capture_default_str();
    run->add_option("--jobs", ra.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    run->add_option("--out", ra.out, "output directory (default $CSIBREATH_OUT or ./csibreath-out)");

    SpectrogramArgs pa;
    auto* spec = app.add_subcommand("spectrogram", "spectrogram CSV and image of one or two series");
    spec->add_option("inputs", pa.inputs, "reference-format series files (one or two)")->required()->expected(1, 2);
    spec->add_option("--window", pa.window, "window length, s")->capture_default_str();
    spec->add_option("--overlap", pa.overlap, "window overlap fraction")->capture_default_str();
    spec->add_option("--max-freq", pa.max_freq, "highest frequency drawn, Hz")->capture_default_str();
    spec->add_option("--out", pa.out, "output directory (default $CSIBREATH_OUT or ./csibreath-out)");

    ReportArgs rpa;
    auto* report = app.add_subcommand("report", "merge and re-render report.json files");
    report->add_option("inputs", rpa.inputs, "report.json files or run directories")->required();
    report->add_option("--format", rpa.format, "stdout format")->check(CLI::IsMember({"text", "json", "csv"}))->capture_default_str();
    report->add_option("--out", rpa.out, "write report files here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return Exit::usage;
    }

    try {
        if (*synth) return cmd_synth(sa);
        if (*run) return cmd_run(ra);
        if (*spec) return cmd_spectrogram(pa);
        return cmd_report(rpa);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return Exit::usage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return Exit::data;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return Exit::data;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return Exit::data;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return Exit::internal;
    }
}
