// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// A criterion also fails when it overruns its time budget.

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "csibreath/artifacts.hpp"
#include "csibreath/butterworth.hpp"
#include "csibreath/evaluation.hpp"
#include "csibreath/pipeline.hpp"
#include "csibreath/report.hpp"
#include "csibreath/respiration.hpp"
#include "csibreath/selection.hpp"
#include "csibreath/synth.hpp"
#include "oracles.hpp"

using namespace csibreath;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = budget_s <= 0.0 || secs < budget_s;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::string timing = budget_s > 0.0 ? fmt("%.2f s, budget %.0f s", secs, budget_s) : fmt("%.2f s", secs);
    if (!in_time) timing += ", over budget";
    std::printf("criterion %d: %s  %s: %s (%s)\n", id, pass ? "PASS" : "FAIL", name, v.detail.c_str(), timing.c_str());
    std::fflush(stdout);
}

Verdict filter_correctness() {
    const FilterSpec spec;
    const BandpassFilter bp(spec);
    double worst_edge = 0.0;
    double worst_model = 0.0;
    for (double f : {spec.bp_low, spec.bp_high}) {
        const double db = 20.0 * std::log10(std::abs(bp.response(f)));
        worst_edge = std::max(worst_edge, std::abs(db + 3.0));
    }
    // Independent evaluation of the designed transfer function.
    for (double f = 0.01; f < 5.0; f += 0.01)
        worst_model = std::max(worst_model, std::abs(std::abs(bp.response(f)) -
                                                     oracle::butterworth_bandpass_gain(f, spec.bp_low, spec.bp_high, spec.bp_order,
                                                                                       spec.target_rate)));
    // Zero-phase rejection at 1 Hz, both from |H|^2 and measured on a filtered tone.
    const double model_db = 40.0 * std::log10(std::abs(bp.response(1.0)));
    const auto tone = oracle::sine(1.0, spec.target_rate, 60 * 120);
    const auto y = bp.filtfilt(tone);
    const double measured_db = 20.0 * std::log10(oracle::tone_amplitude(y, 1.0, spec.target_rate, 600, y.size() - 600));
    const bool pass = worst_edge <= 0.5 && worst_model < 1e-9 && model_db <= -40.0 && measured_db <= -40.0;
    return {pass, fmt("band edges within %.4f dB of -3 dB, |H| vs prototype %.1e, 1 Hz zero-phase %.1f dB (tone %.1f dB)",
                      worst_edge, worst_model, model_db, measured_db)};
}

Verdict hampel_equivalence() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::bernoulli_distribution spike(0.02);
    std::vector<double> x(10000);
    double level = 0.0;
    for (auto& v : x) v = (level += 0.1 * g(rng)) + g(rng) + (spike(rng) ? (g(rng) > 0 ? 15.0 : -15.0) : 0.0);
    const auto hw = hampel_half_width(FilterSpec{}.hampel_window, CsiRecord::kDefaultNominalRate);
    std::size_t mismatches = 0, replaced = 0;
    const auto got = hampel_samples(x, hw, 1.7);
    const auto want = oracle::hampel(x, hw, 1.7);
    for (std::size_t i = 0; i < x.size(); ++i) {
        mismatches += got[i] != want[i];
        replaced += got[i] != x[i];
    }
    return {mismatches == 0, fmt("%zu of 10000 samples differ from the brute-force oracle; %zu replaced", mismatches, replaced)};
}

Verdict pca_equivalence() {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    double worst_proj = 0.0, worst_norm = 0.0;
    bool ordered = true;
    const std::size_t len = 64, m = 8;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::MatrixXd latent(len, m), mix(m, m);
        for (Eigen::Index i = 0; i < latent.size(); ++i) latent.data()[i] = g(rng);
        for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = g(rng);
        const Eigen::MatrixXd data = latent * mix;
        ChannelSet ch;
        ch.rate = 60.0;
        ch.channels.assign(m, std::vector<double>(len));
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t i = 0; i < len; ++i) ch.channels[k][i] = data(Eigen::Index(i), Eigen::Index(k));
        const auto pw = pca_window(ch, 0, len);

        const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered.transpose() * centered / double(len - 1));
        const Eigen::VectorXd want = centered * es.eigenvectors().col(Eigen::Index(m) - 1);
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += pw.projection[i] * want(Eigen::Index(i));
        const double sign = dot < 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < len; ++i)
            worst_proj = std::max(worst_proj, std::abs(pw.projection[i] - sign * want(Eigen::Index(i))));
        for (std::size_t c = 0; c < m; ++c) {
            double norm = 0.0;
            for (std::size_t k = 0; k < m; ++k) norm += pw.axes.vectors(k, c) * pw.axes.vectors(k, c);
            worst_norm = std::max(worst_norm, std::abs(std::sqrt(norm) - 1.0));
            if (c > 0 && pw.axes.values[c] > pw.axes.values[c - 1]) ordered = false;
        }
    }
    return {worst_proj <= 1e-9 && worst_norm <= 1e-12 && ordered,
            fmt("200 windows 64x8: max projection error %.1e, max |norm - 1| %.1e, variances %s", worst_proj, worst_norm,
                ordered ? "non-increasing" : "OUT OF ORDER")};
}

Verdict cycle_count_oracle() {
    // Noiseless: 10-24 bpm in 0.25 bpm steps, random phase, ten 30 s epochs each.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int epochs = 0, wrong = 0;
    for (double bpm = 10.0; bpm <= 24.0 + 1e-9; bpm += 0.25) {
        const UniformSeries x{oracle::sine(bpm / 60.0, 60.0, 18000, 1.0, 2.0 * std::numbers::pi * unit(rng)), 60.0, 0.0};
        const auto ep = count_cycles(detect_turning_points(x), EpochGrid::tiling(x, 30.0));
        for (const auto& e : ep) {
            ++epochs;
            wrong += e.integer_count != oracle::round_half_up(oracle::analytic_cycles(bpm, e.start, e.start + 30.0));
        }
    }

    // SNR 10 dB: one 30 s epoch per seed, conditioned with the pipeline's own
    // smoothing and band-pass, 10 s of filter transient discarded on each side.
    int matched = 0;
    const std::size_t margin = 600;
    for (unsigned seed = 0; seed < 100; ++seed) {
        std::mt19937_64 r(seed);
        const double bpm = 10.0 + 14.0 * unit(r);
        const double phase = unit(r);
        const auto clean = oracle::sine(bpm / 60.0, 60.0, 1800 + 2 * margin, 1.0, 2.0 * std::numbers::pi * phase);
        std::normal_distribution<double> g(0.0, std::sqrt(0.5 / 10.0));
        auto noisy = clean;
        for (auto& v : noisy) v += g(r);
        noisy = BandpassFilter(FilterSpec{}).filtfilt(moving_average_samples(noisy, moving_average_length(1.5, 60.0)));
        const UniformSeries a{{clean.begin() + margin, clean.end() - margin}, 60.0, 0.0};
        const UniformSeries b{{noisy.begin() + margin, noisy.end() - margin}, 60.0, 0.0};
        const auto ca = integer_counts(count_cycles(detect_turning_points(a), EpochGrid::tiling(a, 30.0)));
        const auto cb = integer_counts(count_cycles(detect_turning_points(b), EpochGrid::tiling(b, 30.0)));
        matched += ca == cb;
    }
    return {wrong == 0 && matched >= 95,
            fmt("noiseless: %d of %d epochs wrong; SNR 10 dB: %d of 100 seeds match", wrong, epochs, matched)};
}

struct SuiteRun {
    ReportSet report;
    FileSet files;
};

SuiteRun run_suite(const std::vector<SuiteRecord>& suite, ExtractionMethod method) {
    PipelineConfig cfg;
    cfg.method = method;
    SuiteRun run;
    std::vector<RecordResult> results;
    for (const auto& r : suite) {
        auto out = process_record(r.data.record, r.data.truth.reference, cfg, r.id);
        run.files.merge(record_files(out, r.id));
        results.push_back(std::move(out.result));
    }
    run.report = build_report(std::move(results));
    run.files.merge(report_files(run.report));
    return run;
}

std::optional<double> posture_cell(const ReportSet& rep, const std::string& table, const std::string& column) {
    const auto* t = rep.table(table);
    for (std::size_t c = 0; t && c < t->columns.size(); ++c)
        if (t->columns[c] == column) return t->mean.cells[c];
    return std::nullopt;
}

}  // namespace

int main() {
    std::printf("csibreath acceptance\n");
    criterion(1, "band-pass design", 1.0, filter_correctness);
    criterion(2, "Hampel vs brute force", 5.0, hampel_equivalence);
    criterion(3, "PCA vs eigendecomposition", 5.0, pca_equivalence);
    criterion(4, "cycle counts vs analytic", 30.0, cycle_count_oracle);

    SuiteRun pca_run, corr_run;
    criterion(5, "suite MAD, PCA, SNR 20 dB", 60.0, [&] {
        const auto suite = subject_suite(default_profiles(), SuiteOptions{});
        pca_run = run_suite(suite, ExtractionMethod::pca);
        const double mad = pca_run.report.mad.value_or(1e9);
        const auto supine = posture_cell(pca_run.report, "mad", "Supine");
        const auto prone = posture_cell(pca_run.report, "mad", "Prone");
        const bool pass = suite.size() == 15 && mad <= 0.4 && supine && prone && *prone >= *supine;
        return Verdict{pass, fmt("overall MAD %.3f breaths/epoch (<= 0.4), prone %.3f >= supine %.3f", mad, prone.value_or(-1),
                                 supine.value_or(-1))};
    });
    criterion(6, "suite correlation, reference selection", 60.0, [&] {
        const auto suite = subject_suite(default_profiles(), SuiteOptions{});
        corr_run = run_suite(suite, ExtractionMethod::correlation);
        double lo = 1.0, hi = -1.0;
        for (const auto& r : corr_run.report.records) {
            lo = std::min(lo, r.comparison->mean_correlation);
            hi = std::max(hi, r.comparison->mean_correlation);
        }
        const double r = corr_run.report.mean_correlation.value_or(-1.0);
        return Verdict{r >= 0.85, fmt("mean windowed r %.4f (>= 0.85), per-record range %.4f to %.4f", r, lo, hi)};
    });

    criterion(7, "metric arithmetic and JSON round trip", 1.0, [] {
        bool ok = mad_rr(std::vector<int>{8, 8, 9, 10}, std::vector<int>{8, 9, 9, 12}) == 0.75;
        const auto stats = epoch_error_stats(std::vector<int>{8, 8, 9, 10}, std::vector<int>{8, 9, 9, 12});
        ok = ok && stats.pct_ge1 == 50.0 && stats.pct_ge2 == 25.0 && stats.histogram == std::map<int, int>{{0, 2}, {1, 1}, {2, 1}};

        // Two subjects with hand-computed pooled values.
        auto rec = [](std::string subject, Posture p, std::vector<int> ref, std::vector<int> sig, double r) {
            RecordResult rr;
            rr.record_id = subject + "_" + to_string(p);
            rr.subject = subject;
            rr.posture = p;
            rr.method = "pca";
            rr.comparison = compare_counts(ref, sig, WindowedCorrelation{r, {r}}, 0.0);
            return rr;
        };
        const auto rep = build_report({rec("a", Posture::supine, {10, 10}, {10, 11}, 0.9),
                                       rec("a", Posture::prone, {10, 10}, {12, 10}, 0.7),
                                       rec("b", Posture::supine, {10, 10}, {10, 10}, 0.8)});
        const auto* mad = rep.table("mad");
        ok = ok && mad && mad->rows[0].cells == std::vector<std::optional<double>>{0.5, 1.0, 0.75} &&
             mad->rows[1].cells == std::vector<std::optional<double>>{0.0, std::nullopt, 0.0} &&
             mad->mean.cells == std::vector<std::optional<double>>{0.25, 1.0, 0.375} && rep.mad == 0.375;
        const auto back = report_from_json_text(to_json_text(rep));
        ok = ok && back == rep && render_text(back) == render_text(rep);
        return Verdict{ok, ok ? "hand-computed MAD, percentages, histogram and pooled tables reproduced; JSON round trip lossless"
                              : "mismatch against hand-computed values"};
    });

    criterion(8, "determinism across full runs", 0.0, [&] {
        const auto a = subject_suite(default_profiles(), SuiteOptions{});
        const auto b = subject_suite(default_profiles(), SuiteOptions{});
        const bool data_same = suite_files(a, CsiFormat::csv) == suite_files(b, CsiFormat::csv);
        const auto pca_again = run_suite(b, ExtractionMethod::pca);
        const auto corr_again = run_suite(b, ExtractionMethod::correlation);
        std::size_t files = pca_again.files.size() + corr_again.files.size();
        const bool same = data_same && pca_again.files == pca_run.files && corr_again.files == corr_run.files;
        return Verdict{same, fmt("%s; %zu report and waveform files %s", data_same ? "datasets identical" : "datasets DIFFER", files,
                                 same ? "byte-identical" : "DIFFER")};
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
