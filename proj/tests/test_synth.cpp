#include <gtest/gtest.h>

#include <array>
#include <map>
#include <random>

#include "csibreath/csi_io.hpp"
#include "csibreath/pipeline.hpp"
#include "csibreath/synth.hpp"
#include "oracles.hpp"

using namespace csibreath;

namespace {

SynthSpec quiet_spec(double duration, double bpm) {
    SynthSpec spec;
    spec.duration = duration;
    spec.jitter_std = 0.0;
    spec.outlier_rate = 0.0;
    spec.breathing = {{0.0, bpm, 1.0}};
    return spec;
}

}  // namespace

TEST(Generate, SameSeedIsBitIdentical) {
    SynthSpec spec;
    spec.duration = 40.0;
    spec.noise_snr_db = 10.0;
    spec.seed = 99;
    spec.breathing = {{0.0, 13.0, 1.0}, {20.0, 19.0, 0.7}};
    const auto a = generate(spec), b = generate(spec);
    EXPECT_EQ(a.record, b.record);
    EXPECT_EQ(to_csv(a.record), to_csv(b.record));
    EXPECT_EQ(a.truth.reference, b.truth.reference);
    EXPECT_EQ(a.truth.epoch_cycles, b.truth.epoch_cycles);

    spec.seed = 100;
    EXPECT_NE(generate(spec).record, a.record);
}

TEST(Generate, OutlierCountWithinThreeSigmaOfBinomial) {
    SynthSpec spec;
    spec.n_subcarriers = 1;
    spec.nominal_rate = 50.0;
    spec.duration = 10000.0 / 50.0 - 0.01;
    spec.outlier_rate = 0.02;
    spec.seed = 5;
    const auto out = generate(spec);
    // Jitter moves the frame count slightly; the binomial uses the actual total.
    const auto n = double(out.truth.value_count);
    ASSERT_NEAR(n, 10000.0, 50.0);
    const double mean = 0.02 * n, sd = std::sqrt(n * 0.02 * 0.98);
    EXPECT_NEAR(double(out.truth.outlier_count), mean, 3.0 * sd);
}

TEST(Generate, TruthIsRecomputableFromBoundaries) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthSpec spec;
        spec.duration = 120.0 + 60.0 * u(rng);
        spec.n_subcarriers = 2;
        spec.seed = seed;
        spec.initial_phase = u(rng);
        spec.breathing = {{0.0, 12.0 + 12.0 * u(rng), 1.0}, {50.0, 12.0 + 12.0 * u(rng), 0.5 + u(rng)}};
        const auto out = generate(spec);
        const double end = out.record.timestamps().back();
        EXPECT_EQ(tally_epoch_cycles(out.truth.cycle_boundaries, end, 30.0), out.truth.epoch_cycles);
        for (std::size_t e = 0; e < out.truth.epoch_counts.size(); ++e)
            EXPECT_EQ(out.truth.epoch_counts[e], oracle::round_half_up(out.truth.epoch_cycles[e]));

        // Boundaries sit exactly on the waveform maxima.
        const BreathingSchedule sched(spec.breathing, spec.initial_phase);
        for (double t : out.truth.cycle_boundaries)
            EXPECT_NEAR(sched.value(t), spec.breathing[sched.segment_at(t)].amplitude, 1e-9);
    }
}

TEST(Generate, TimestampsStrictlyIncreaseUnderHeavyJitter) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SynthSpec spec;
        spec.duration = 20.0;
        spec.n_subcarriers = 1;
        spec.seed = seed;
        // Jitter comparable to the period forces the positive clamp to engage.
        spec.jitter_std = 0.02 * double(seed % 5);
        const auto t = generate(spec).record.timestamps();
        for (std::size_t i = 1; i < t.size(); ++i) ASSERT_GT(t[i], t[i - 1]) << seed;
        ASSERT_GE(t.back(), spec.duration);
    }
}

TEST(Generate, NoiselessSubcarriersTrackTheReference) {
    auto spec = quiet_spec(60.0, 15.0);
    const auto out = generate(spec);
    const FilterSpec filter;
    const auto channels = preprocess_subcarriers(out.record, filter);
    const auto ref = sample_on_grid(preprocess_reference(out.truth.reference, filter), channels.start_time, channels.rate,
                                    channels.samples());
    for (const auto& ch : channels.channels) {
        const auto r = pearson(ch, ref.samples);
        ASSERT_TRUE(r);
        EXPECT_GT(std::abs(*r), 0.99);
    }

    // Peaks at 1 + 4k s: a quarter cycle before the first, three quarters after
    // the last. Each epoch holds 7.5 cycles, which the half-up rule makes 8.
    ASSERT_EQ(out.truth.cycle_boundaries.size(), 15u);
    ASSERT_EQ(out.truth.epoch_cycles.size(), 2u);
    EXPECT_NEAR(out.truth.epoch_cycles[0] + out.truth.epoch_cycles[1], 15.0, 1e-3);
    EXPECT_NEAR(out.truth.epoch_cycles[0], 7.5, 1e-3);
    EXPECT_EQ(out.truth.epoch_counts, (std::vector<int>{8, 8}));
}

TEST(Generate, RejectsInvalidSpecs) {
    auto spec = quiet_spec(60.0, 30.0);
    EXPECT_THROW(generate(spec), std::invalid_argument);
    spec.allow_out_of_band = true;
    EXPECT_NO_THROW(generate(spec));

    auto bad = quiet_spec(60.0, 15.0);
    bad.duration = 0.0;
    EXPECT_THROW(generate(bad), std::invalid_argument);
    bad = quiet_spec(60.0, 15.0);
    bad.outlier_rate = 1.0;
    EXPECT_THROW(generate(bad), std::invalid_argument);
    bad = quiet_spec(60.0, 15.0);
    bad.weights = {1.0, 2.0};
    EXPECT_THROW(generate(bad), std::invalid_argument);
    bad = quiet_spec(60.0, 15.0);
    bad.breathing = {{5.0, 15.0, 1.0}};
    EXPECT_THROW(generate(bad), std::invalid_argument);
    bad.breathing = {{0.0, 15.0, 1.0}, {0.0, 16.0, 1.0}};
    EXPECT_THROW(generate(bad), std::invalid_argument);
}

TEST(Generate, ComplexOutputHasTheSameMagnitudes) {
    auto spec = quiet_spec(10.0, 15.0);
    const auto mags = generate(spec);
    spec.complex_output = true;
    const auto cplx = generate(spec);
    ASSERT_EQ(cplx.record.kind(), SampleKind::complex);
    const auto a = magnitudes(mags.record), b = magnitudes(cplx.record);
    ASSERT_EQ(a.rows(), b.rows());
    // Carrier phases are drawn after the weights and baselines, so a noiseless
    // record has the same coupling either way.
    for (std::size_t i = 0; i < a.data().size(); ++i) ASSERT_NEAR(a.data()[i], b.data()[i], 1e-9);
}

TEST(SubjectSuite, DefaultSuiteShape) {
    SuiteOptions opt;
    opt.duration = 300.0;
    const auto suite = subject_suite(default_profiles(), opt);
    ASSERT_EQ(suite.size(), 15u);
    std::map<Posture, int> per_posture;
    for (const auto& r : suite) {
        ++per_posture[r.data.record.meta().posture];
        EXPECT_EQ(r.data.truth.epoch_counts.size(), 10u) << r.id;
        const double span = r.data.record.timestamps().back();
        EXPECT_GE(span, 300.0);
        EXPECT_LT(span, 300.1);
        EXPECT_EQ(r.id, r.data.record.meta().subject + "_" + to_string(r.data.record.meta().posture));
        for (const auto& seg : r.spec.breathing) {
            EXPECT_GE(seg.rate_bpm, kMinInBandBpm);
            EXPECT_LE(seg.rate_bpm, kMaxInBandBpm);
        }
    }
    EXPECT_EQ(per_posture[Posture::supine], 5);
    EXPECT_EQ(per_posture[Posture::side], 5);
    EXPECT_EQ(per_posture[Posture::prone], 5);

    // Prone breathing is attenuated to half of supine for the same subject.
    const auto& supine = suite[0].spec.breathing;
    const auto& prone = suite[2].spec.breathing;
    double sa = 0, pa = 0;
    for (const auto& s : supine) sa += s.amplitude;
    for (const auto& s : prone) pa += s.amplitude;
    EXPECT_NEAR(pa / sa, 0.5, 0.06);
    EXPECT_EQ(suite[0].spec.noise_reference_amplitude, suite[2].spec.noise_reference_amplitude);
    EXPECT_THROW(subject_suite({}), std::invalid_argument);
}

TEST(SubjectSuite, MeanCorrelationDoesNotDecreaseWithSnr) {
    // Sign test per adjacent SNR pair: at least 15 of 20 seeds must improve
    // (one-sided binomial p = 0.021 under a coin-flip null).
    const double levels[] = {-30.0, -20.0, -10.0};
    std::vector<std::array<double, 3>> r(20);
    for (int seed = 0; seed < 20; ++seed) {
        for (int l = 0; l < 3; ++l) {
            SynthSpec spec;
            spec.duration = 60.0;
            spec.n_subcarriers = 10;
            spec.seed = 1000 + seed;
            spec.noise_snr_db = levels[l];
            spec.breathing = {{0.0, 12.0 + 0.5 * seed, 1.0}};
            const auto out = generate(spec);
            PipelineConfig cfg;
            cfg.method = ExtractionMethod::correlation;
            r[seed][l] = process_record(out.record, out.truth.reference, cfg).result.comparison->mean_correlation;
        }
    }
    for (int l = 0; l + 1 < 3; ++l) {
        int improved = 0;
        for (const auto& row : r) improved += row[l + 1] >= row[l];
        EXPECT_GE(improved, 15) << levels[l] << " -> " << levels[l + 1] << " dB";
    }
}
