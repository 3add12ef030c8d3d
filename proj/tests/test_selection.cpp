#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "csibreath/preprocess.hpp"
#include "csibreath/selection.hpp"
#include "csibreath/synth.hpp"
#include "oracles.hpp"

using namespace csibreath;

namespace {

std::vector<double> noise(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

ChannelSet make_channels(std::vector<std::vector<double>> ch, double rate = 60.0) {
    ChannelSet c;
    c.channels = std::move(ch);
    c.rate = rate;
    return c;
}

}  // namespace

TEST(PartitionWindows, MergesShortRemainder) {
    EXPECT_EQ(partition_windows(24, 10), (std::vector<WindowSpan>{{0, 10}, {10, 14}}));
    EXPECT_EQ(partition_windows(25, 10), (std::vector<WindowSpan>{{0, 10}, {10, 10}, {20, 5}}));
    EXPECT_EQ(partition_windows(26, 10), (std::vector<WindowSpan>{{0, 10}, {10, 10}, {20, 6}}));
    EXPECT_EQ(partition_windows(30, 10), (std::vector<WindowSpan>{{0, 10}, {10, 10}, {20, 10}}));
    EXPECT_EQ(partition_windows(7, 10), (std::vector<WindowSpan>{{0, 7}}));
    for (std::size_t n = 1; n < 200; ++n) {
        std::size_t covered = 0;
        for (const auto& w : partition_windows(n, 17)) {
            ASSERT_EQ(w.start, covered);
            covered += w.length;
        }
        ASSERT_EQ(covered, n);
    }
}

// ---- Correlation selection ------------------------------------------------

TEST(SelectByCorrelation, ExactCopyIsChosen) {
    std::mt19937_64 rng(1);
    const std::size_t n = 60 * 60;
    const auto ref = oracle::sine(0.27, 60.0, n);
    for (double polarity : {1.0, -1.0}) {
        std::vector<std::vector<double>> ch;
        for (int k = 0; k < 6; ++k) ch.push_back(noise(n, rng));
        for (std::size_t i = 0; i < n; ++i) ch[3][i] = polarity * ref[i] * 5.0 + 2.0;
        const auto res = select_by_correlation(make_channels(ch), {ref, 60.0, 0.0}, 10.0);
        ASSERT_EQ(res.per_window.size(), 6u);
        for (const auto& d : res.per_window) {
            EXPECT_EQ(d.channel, 3u);
            EXPECT_NEAR(d.correlation, polarity, 1e-12);
            const auto to = d.span.start + d.span.length;
            EXPECT_NEAR(oracle::pearson(res.signal.samples, ref, d.span.start, to), 1.0, 1e-12);
        }
    }
}

TEST(SelectByCorrelation, RecoversPlantedAlternatingSchedule) {
    // Channel 4 carries the rhythm during even 20 s blocks, channel 9 during odd ones.
    std::mt19937_64 rng(2);
    const std::size_t n = 60 * 120;
    const auto ref = oracle::sine(0.3, 60.0, n);
    std::vector<std::vector<double>> ch;
    for (int k = 0; k < 12; ++k) ch.push_back(noise(n, rng, 0.8));
    for (std::size_t i = 0; i < n; ++i) {
        const bool even_block = (i / (20 * 60)) % 2 == 0;
        ch[even_block ? 4 : 9][i] += 3.0 * ref[i];
        ch[even_block ? 9 : 4][i] += 0.3 * ref[i];
    }
    const auto res = select_by_correlation(make_channels(ch), {ref, 60.0, 0.0}, 10.0);
    ASSERT_EQ(res.per_window.size(), 12u);
    for (std::size_t w = 0; w < 12; ++w) EXPECT_EQ(res.per_window[w].channel, (w / 2) % 2 == 0 ? 4u : 9u) << w;
}

TEST(SelectByCorrelation, ChosenSegmentBeatsEveryChannel) {
    std::mt19937_64 rng(3);
    const std::size_t n = 60 * 55;
    const auto ref = noise(n, rng);
    std::vector<std::vector<double>> ch;
    for (int k = 0; k < 8; ++k) {
        auto c = noise(n, rng);
        for (std::size_t i = 0; i < n; ++i) c[i] += (0.2 * k - 0.7) * ref[i];
        ch.push_back(std::move(c));
    }
    const auto channels = make_channels(ch);
    const auto res = select_by_correlation(channels, {ref, 60.0, 0.0}, 10.0);
    // 55 s: five full windows, the 5 s remainder is exactly half a window and is kept.
    ASSERT_EQ(res.per_window.size(), 6u);
    for (const auto& d : res.per_window) {
        const auto from = d.span.start, to = d.span.start + d.span.length;
        const double chosen = oracle::pearson(res.signal.samples, ref, from, to);
        for (const auto& c : ch) ASSERT_GE(chosen + 1e-12, std::abs(oracle::pearson(c, ref, from, to)));
        EXPECT_GE(d.correlation, -1.0);
        EXPECT_LE(d.correlation, 1.0);
    }
    EXPECT_EQ(res.signal.size(), channels.samples());
    EXPECT_EQ(res.signal.rate, channels.rate);
}

TEST(SelectByCorrelation, RejectsGridMismatch) {
    const auto channels = make_channels({std::vector<double>(600, 0.0)});
    EXPECT_THROW(select_by_correlation(channels, {std::vector<double>(599, 0.0), 60.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(select_by_correlation(channels, {std::vector<double>(600, 0.0), 50.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(select_by_correlation(channels, {std::vector<double>(600, 0.0), 60.0, 1.0}), std::invalid_argument);
}

// ---- PCA ------------------------------------------------------------------

TEST(Pca, MatchesEigenOnRandomWindows) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t len = 64, m = 8;
        // Correlated channels via a random mixing matrix so eigenvalues are distinct.
        Eigen::MatrixXd latent(len, m), mix(m, m);
        for (Eigen::Index i = 0; i < latent.size(); ++i) latent.data()[i] = g(rng);
        for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = g(rng);
        const Eigen::MatrixXd data = latent * mix;
        std::vector<std::vector<double>> ch(m, std::vector<double>(len));
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t i = 0; i < len; ++i) ch[k][i] = data(Eigen::Index(i), Eigen::Index(k)) + 3.0 * double(k);

        const auto pw = pca_window(make_channels(ch), 0, len);

        const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
        const Eigen::MatrixXd cov = centered.transpose() * centered / double(len - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        const Eigen::VectorXd top = es.eigenvectors().col(Eigen::Index(m) - 1);
        const Eigen::VectorXd want = centered * top;

        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += pw.projection[i] * want(Eigen::Index(i));
        const double sign = dot < 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < len; ++i) ASSERT_NEAR(pw.projection[i], sign * want(Eigen::Index(i)), 1e-9);

        for (std::size_t c = 0; c < m; ++c) {
            double norm = 0.0;
            for (std::size_t k = 0; k < m; ++k) norm += pw.axes.vectors(k, c) * pw.axes.vectors(k, c);
            ASSERT_NEAR(norm, 1.0, 1e-12);
            ASSERT_NEAR(pw.axes.values[c], es.eigenvalues()(Eigen::Index(m - 1 - c)), 1e-9 * es.eigenvalues().maxCoeff());
            if (c > 0) {
                ASSERT_LE(pw.axes.values[c], pw.axes.values[c - 1]);
            }
        }
        // Full reconstruction from every component returns the centered data.
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t k = 0; k < m; ++k) {
                double acc = 0.0;
                for (std::size_t c = 0; c < m; ++c) {
                    double score = 0.0;
                    for (std::size_t j = 0; j < m; ++j) score += centered(Eigen::Index(i), Eigen::Index(j)) * pw.axes.vectors(j, c);
                    acc += score * pw.axes.vectors(k, c);
                }
                ASSERT_NEAR(acc, centered(Eigen::Index(i), Eigen::Index(k)), 1e-9);
            }
    }
}

TEST(Pca, RankOneWindow) {
    const std::size_t n = 60 * 30;
    const auto s = oracle::sine(0.25, 60.0, n);
    std::vector<std::vector<double>> ch;
    for (int k = 0; k < 50; ++k) {
        const double w = 0.2 + 0.015 * k * (k % 2 ? -1.0 : 1.0);
        std::vector<double> c(n);
        for (std::size_t i = 0; i < n; ++i) c[i] = 10.0 + w * s[i];
        ch.push_back(std::move(c));
    }
    const auto res = extract_pca(make_channels(ch), 30.0);
    ASSERT_EQ(res.per_window.size(), 1u);
    EXPECT_GT(std::abs(oracle::pearson(res.signal.samples, s)), 0.999);
    EXPECT_GT(res.per_window[0].explained_variance, 0.999);
}

TEST(Pca, TwoChannelClosedForm) {
    // Var(2 sin) = 4 Var(cos); sin and cos are orthogonal over whole periods,
    // so the covariance is diagonal and the leading axis is (1, 0).
    const std::size_t n = 60 * 40;
    auto a = oracle::sine(0.25, 60.0, n, 2.0);
    auto b = oracle::sine(0.25, 60.0, n, 1.0, std::numbers::pi / 2.0);
    const auto pw = pca_window(make_channels({a, b}), 0, n);
    EXPECT_NEAR(std::abs(pw.loading[0]), 1.0, 1e-6);
    EXPECT_NEAR(pw.loading[1], 0.0, 1e-6);
    EXPECT_NEAR(pw.axes.values[0] / pw.axes.values[1], 4.0, 1e-6);
}

TEST(Pca, StationaryInputHasNoSignFlipsAcrossWindows) {
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t n = 60 * 240;
        const auto s = oracle::sine(0.23 + 0.01 * seed, 60.0, n);
        std::vector<std::vector<double>> ch;
        std::uniform_real_distribution<double> w(-1.0, 1.0);
        for (int k = 0; k < 20; ++k) {
            auto c = noise(n, rng, 0.3);
            const double wk = w(rng);
            for (std::size_t i = 0; i < n; ++i) c[i] += wk * s[i];
            ch.push_back(std::move(c));
        }
        const auto res = extract_pca(make_channels(ch), 30.0);
        ASSERT_EQ(res.per_window.size(), 8u);
        const double first = oracle::pearson(res.signal.samples, s, 0, 1800);
        for (const auto& d : res.per_window) {
            const double r = oracle::pearson(res.signal.samples, s, d.span.start, d.span.start + d.span.length);
            EXPECT_GT(r * first, 0.0) << "seed " << seed << " window at " << d.start_time;
            double norm = 0.0;
            for (double v : d.loading) norm += v * v;
            EXPECT_NEAR(norm, 1.0, 1e-12);
            EXPECT_GE(d.explained_variance, 0.0);
            EXPECT_LE(d.explained_variance, 1.0);
        }
    }
}

TEST(Pca, FirstWindowPutsMaximumBeforeMinimum) {
    const std::size_t n = 60 * 30;
    auto s = oracle::sine(0.25, 60.0, n);
    for (double pol : {1.0, -1.0}) {
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = pol * s[i], b[i] = -0.5 * pol * s[i];
        const auto& sig = extract_pca(make_channels({a, b}), 30.0).signal.samples;
        const auto imax = std::max_element(sig.begin(), sig.end()) - sig.begin();
        const auto imin = std::min_element(sig.begin(), sig.end()) - sig.begin();
        EXPECT_LT(imax, imin);
    }
}

TEST(Pca, DegenerateWindowEmitsZeros) {
    const std::size_t n = 60 * 60;
    auto s = oracle::sine(0.25, 60.0, n);
    std::vector<double> a(n, 1.0), b(n, 2.0);
    for (std::size_t i = 1800; i < n; ++i) a[i] = s[i], b[i] = 0.5 * s[i];
    const auto res = extract_pca(make_channels({a, b}), 30.0);
    ASSERT_EQ(res.per_window.size(), 2u);
    EXPECT_TRUE(res.per_window[0].degenerate);
    EXPECT_FALSE(res.per_window[1].degenerate);
    for (std::size_t i = 0; i < 1800; ++i) ASSERT_EQ(res.signal.samples[i], 0.0);
    EXPECT_THROW(extract_pca(make_channels({std::vector<double>(100, 0.0)}), 0.5), std::invalid_argument);
}

TEST(Pca, SynthRecordFollowsReference) {
    SynthSpec spec;
    spec.duration = 120.0;
    spec.noise_snr_db = 20.0;
    spec.seed = 21;
    spec.breathing = {{0.0, 16.3, 1.0}};
    const auto gen = generate(spec);
    const auto channels = preprocess_subcarriers(gen.record, FilterSpec{});
    const auto res = extract_pca(channels, 30.0);
    const auto ref = sample_on_grid(gen.truth.breathing, channels.start_time, channels.rate, channels.samples());
    EXPECT_GT(std::abs(oracle::pearson(res.signal.samples, ref.samples, 600, channels.samples() - 600)), 0.9);
}
