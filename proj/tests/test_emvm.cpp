#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pgpack/emvm.hpp"

using namespace pgpack;

namespace {

// Modified Bessel function of the first kind by its power series.
double bessel_i_series(int nu, double x) {
    double term = std::pow(0.5 * x, nu) / std::tgamma(nu + 1.0), sum = 0.0;
    for (int k = 0; k < 200; ++k) {
        sum += term;
        term *= 0.25 * x * x / ((k + 1.0) * (k + 1.0 + nu));
    }
    return sum;
}

// CDF of von Mises(mu, kappa) on [0, 2pi) by trapezoidal integration of the density.
struct VonMisesCdf {
    int m = 20000;
    std::vector<double> cdf;
    VonMisesCdf(double mu, double kappa) : cdf(std::size_t(m) + 1, 0.0) {
        const double h = kTwoPi / m;
        auto f = [&](double t) { return std::exp(kappa * std::cos(t - mu)); };
        for (int k = 0; k < m; ++k) cdf[std::size_t(k) + 1] = cdf[std::size_t(k)] + 0.5 * h * (f(k * h) + f((k + 1) * h));
        for (double& c : cdf) c /= cdf.back();
    }
    double operator()(double t) const {
        const double x = t / kTwoPi * m;
        const int k = std::clamp(int(x), 0, m - 1);
        return cdf[std::size_t(k)] + (x - k) * (cdf[std::size_t(k) + 1] - cdf[std::size_t(k)]);
    }
};

std::vector<double> column(const SampleBatch& b, std::size_t i) {
    std::vector<double> v(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) v[k] = b.points(Eigen::Index(k), Eigen::Index(i));
    return v;
}

template <class Cdf>
double ks_statistic(std::vector<double> x, const Cdf& cdf) {
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double f = cdf(x[k]);
        d = std::max({d, f - k / n, (k + 1) / n - f});
    }
    return d;
}

double ks_two_sample(std::vector<double> x, std::vector<double> y) {
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t) ++i;
        while (j < y.size() && y[j] <= t) ++j;
        d = std::max(d, std::abs(double(i) / x.size() - double(j) / y.size()));
    }
    return d;
}

double angle_diff(double a, double b) { return std::abs(wrap_angle(a - b + kPi) - kPi); }

EMvMParams random_params(std::size_t dim, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, scale);
    EMvMParams p = uniform_params(dim);
    for (Eigen::Index q = 0; q < p.coef.size(); ++q) p.coef[q] = g(rng);
    return p;
}

constexpr std::size_t kBurn = 30;

}  // namespace

TEST(Params, CountFormula) {
    for (std::size_t n = 1; n <= 8; ++n) {
        EXPECT_EQ(emvm_param_count(n), 2 * n + 2 * n * (n - 1));
        EXPECT_EQ(uniform_params(n).size(), emvm_param_count(n));
        EXPECT_EQ(uniform_params(n).coef.cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_EQ(emvm_param_count(6), 72u);
    EXPECT_EQ(emvm_param_count(4), 32u);
    EXPECT_EQ(emvm_param_count(1), 2u);
    EXPECT_THROW(uniform_params(0), std::invalid_argument);
}

TEST(Params, PairOffsetsTileTheVector) {
    const std::size_t n = 5;
    std::vector<int> hit(emvm_param_count(n), 0);
    for (std::size_t i = 0; i < 2 * n; ++i) ++hit[i];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t q = 0; q < 4; ++q) ++hit[emvm_pair_offset(i, j, n) + q];
    for (int h : hit) EXPECT_EQ(h, 1);
}

TEST(BatchSize, Examples) {
    EXPECT_EQ(batch_size(72), 1040u);
    EXPECT_EQ(batch_size(32), 464u);
    EXPECT_EQ(batch_size(2), 32u);
    std::size_t last = 0;
    for (std::size_t p = 2; p < 400; ++p) {
        const std::size_t n = batch_size(p);
        EXPECT_LT(double(p) / double(n), 0.07);
        EXPECT_EQ(n % 16, 0u);
        EXPECT_GE(n, last);
        last = n;
    }
    EXPECT_THROW(batch_size(1), std::invalid_argument);
}

TEST(Bessel, RatioMatchesSeries) {
    for (double k : {0.1, 1.0, 5.0, 20.0, 80.0})
        EXPECT_NEAR(bessel_ratio(k), bessel_i_series(1, k) / bessel_i_series(0, k), 1e-10) << k;
    EXPECT_NEAR(bessel_i_series(1, 5.0) / bessel_i_series(0, 5.0), 0.8934, 1e-4);
}

TEST(Gibbs, UniformParamsGiveUniformSamples) {
    const SampleBatch b = gibbs_sample(uniform_params(3), 10000, kBurn, 1);
    EXPECT_EQ(b.size(), 10000u);
    EXPECT_NEAR(b.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(b.points.minCoeff(), 0.0);
    EXPECT_LT(b.points.maxCoeff(), kTwoPi);
    for (double r : concentration(b)) EXPECT_LT(r, 0.05);
}

TEST(Gibbs, OneDimensionalVonMises) {
    EMvMParams p = uniform_params(1);
    p.coef << 5.0 * std::cos(1.0), 5.0 * std::sin(1.0);
    const SampleBatch b = gibbs_sample(p, 10000, kBurn, 2);
    EXPECT_NEAR(circular_mean(b)[0], 1.0, 0.05);
    EXPECT_NEAR(concentration(b)[0], bessel_i_series(1, 5.0) / bessel_i_series(0, 5.0), 0.03);
}

TEST(Gibbs, SineCouplingGivesPositiveCorrelation) {
    EMvMParams p = uniform_params(2);
    p.coef[Eigen::Index(emvm_pair_offset(0, 1, 2) + 1)] = 3.0;
    const SampleBatch b = gibbs_sample(p, 10000, kBurn, 3);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const double n = double(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) {
        const double x = std::sin(b.points(Eigen::Index(k), 0)), y = std::sin(b.points(Eigen::Index(k), 1));
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const double cov = sxy / n - sx * sy / (n * n);
    const double corr = cov / std::sqrt((sxx / n - sx * sx / (n * n)) * (syy / n - sy * sy / (n * n)));
    EXPECT_GT(corr, 0.3);
}

TEST(Gibbs, DiagonalCaseKolmogorovSmirnov) {
    // Critical value of the one-sample KS statistic at alpha = 0.01.
    const std::size_t n = 4000;
    const double crit = 1.628 / std::sqrt(double(n));
    EMvMParams p = uniform_params(3);
    const double mu[3] = {0.5, 3.0, 5.5}, kappa[3] = {0.7, 2.5, 12.0};
    for (std::size_t i = 0; i < 3; ++i) {
        p.coef[Eigen::Index(2 * i)] = kappa[i] * std::cos(mu[i]);
        p.coef[Eigen::Index(2 * i + 1)] = kappa[i] * std::sin(mu[i]);
    }
    const SampleBatch b = gibbs_sample(p, n, kBurn, 4);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(ks_statistic(column(b, i), VonMisesCdf(mu[i], kappa[i])), crit) << i;
}

TEST(Gibbs, DeterministicAcrossThreadCounts) {
    std::mt19937_64 rng(5);
    const EMvMParams p = random_params(4, 1.0, rng);
    const SampleBatch a = gibbs_sample(p, 500, kBurn, 9, 3, nullptr, 1);
    const SampleBatch b = gibbs_sample(p, 500, kBurn, 9, 3, nullptr, 4);
    const SampleBatch c = gibbs_sample(p, 500, kBurn, 9, 4, nullptr, 1);
    EXPECT_TRUE(a.points == b.points);
    EXPECT_FALSE(a.points == c.points);
}

TEST(Concentration, Examples) {
    SampleBatch same;
    same.points = PointMatrix::Constant(10, 3, 1.3);
    set_uniform_weights(same);
    for (double r : concentration(same)) EXPECT_NEAR(r, 1.0, 1e-12);
    SampleBatch empty;
    EXPECT_THROW(concentration(empty), std::invalid_argument);
}

TEST(KlEstimate, ZeroForIdenticalParams) {
    std::mt19937_64 rng(6);
    const EMvMParams p = random_params(3, 1.0, rng);
    const SampleBatch b = gibbs_sample(p, 200, kBurn, 1);
    EXPECT_EQ(kl_estimate(p, p, b), 0.0);
}

TEST(KlEstimate, UniformToVonMises) {
    // Oracle: KL(uniform || vM(mu, kappa)) by trapezoidal integration.
    auto kl_numeric = [](double kappa) {
        const int m = 100000;
        double z = 0.0, e = 0.0;
        for (int k = 0; k < m; ++k) {
            const double t = kTwoPi * (k + 0.5) / m;
            z += std::exp(kappa * std::cos(t - 1.0)) / m;
            e += kappa * std::cos(t - 1.0) / m;
        }
        return std::log(z) - e;
    };
    EXPECT_NEAR(kl_numeric(1.0), 0.2359, 1e-4);
    const SampleBatch b = gibbs_sample(uniform_params(1), 10000, kBurn, 7);
    double last = 0.0;
    for (double kappa : {0.5, 1.0, 2.0, 4.0}) {
        EMvMParams vm = uniform_params(1);
        vm.coef << kappa * std::cos(1.0), kappa * std::sin(1.0);
        const double kl = kl_estimate(vm, uniform_params(1), b);
        if (kappa == 1.0) {
            EXPECT_NEAR(kl, kl_numeric(1.0), 0.02);
        }
        EXPECT_NEAR(kl, kl_numeric(kappa), 0.1 * kl_numeric(kappa) + 0.02) << kappa;
        EXPECT_GT(kl, last);
        last = kl;
    }
}

TEST(Fit, DegenerateBatchReturnsPrev) {
    SampleBatch b;
    b.points = PointMatrix::Constant(20, 2, 0.4);
    set_uniform_weights(b);
    std::mt19937_64 rng(8);
    const EMvMParams prev = random_params(2, 0.5, rng);
    const FitOutcome f = fit_weighted(b, prev, 1.0);
    EXPECT_TRUE(f.degenerate);
    EXPECT_TRUE(f.params.coef == prev.coef);
    EXPECT_THROW(fit_weighted(b, prev, 0.0), std::invalid_argument);
}

TEST(Fit, UniformBatchStaysNearUniform) {
    const std::size_t n = 10000;
    const SampleBatch b = gibbs_sample(uniform_params(2), n, kBurn, 10);
    const FitOutcome f = fit_weighted(b, uniform_params(2), 1.0);
    EXPECT_LT(f.params.coef.cwiseAbs().maxCoeff(), 3.0 / std::sqrt(double(n)));
}

TEST(Fit, FixedPointOfSampledBatch) {
    std::mt19937_64 rng(11);
    const EMvMParams prev = random_params(3, 0.8, rng);
    const SampleBatch b = gibbs_sample(prev, 20000, kBurn, 12);
    const FitOutcome f = fit_weighted(b, prev, 1.0);
    EXPECT_LT((f.params.coef - prev.coef).cwiseAbs().maxCoeff(), 0.1);
    // Both distributions agree to sampling precision on an independent batch.
    EXPECT_LT(kl_estimate(f.params, prev, gibbs_sample(prev, 20000, kBurn, 13)), 5e-3);
}

TEST(Fit, RecoversVonMises) {
    Rng rng(14);
    SampleBatch b;
    b.points.resize(10000, 1);
    for (Eigen::Index k = 0; k < b.points.rows(); ++k) b.points(k, 0) = sample_von_mises(1.0, 5.0, rng);
    set_uniform_weights(b);
    const FitOutcome f = fit_weighted(b, uniform_params(1), 100.0);
    const double kappa = std::hypot(f.params.a(0), f.params.b(0));
    EXPECT_NEAR(std::atan2(f.params.b(0), f.params.a(0)), 1.0, 0.05);
    EXPECT_NEAR(kappa, 5.0, 0.75);
}

TEST(Fit, PointMassLimit) {
    const double target[2] = {2.0, 4.5};
    EMvMParams p = uniform_params(2);
    double last_kappa = 0.0;
    for (int round = 0; round < 6; ++round) {
        SampleBatch b = gibbs_sample(p, 400, kBurn, 100 + round);
        b.points.row(0) << target[0], target[1];
        b.weights.setZero();
        b.weights[0] = 1.0;
        p = fit_weighted(b, gibbs_sample(p, 400, kBurn, 200 + round).points, p, 5.0).params;
        const SampleBatch check = gibbs_sample(p, 4000, kBurn, 300 + round);
        const auto r = concentration(check);
        const double kappa = std::min(r[0], r[1]);
        EXPECT_GT(kappa, last_kappa) << round;
        last_kappa = kappa;
        if (round == 5) {
            const auto m = circular_mean(check);
            EXPECT_LT(angle_diff(m[0], target[0]), 0.05);
            EXPECT_LT(angle_diff(m[1], target[1]), 0.05);
        }
    }
    EXPECT_GT(last_kappa, 0.9);
}

TEST(Fit, TrustRegionHonoured) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t dim = 1 + trial % 4;
        const EMvMParams prev = random_params(dim, 0.7, rng);
        SampleBatch b = gibbs_sample(prev, 600, kBurn, 1000 + trial);
        // Rank-like weights on a random subset of elites.
        b.weights.setZero();
        double total = 0.0;
        for (Eigen::Index k = 0; k < 60; ++k) {
            const Eigen::Index idx = Eigen::Index(u(rng) * b.points.rows());
            b.weights[idx] += 60.0 - k;
            total += 60.0 - k;
        }
        b.weights /= total;
        const double delta = 0.01 + u(rng);
        const FitOutcome f = fit_weighted(b, prev, delta);
        EXPECT_LE(kl_estimate(f.params, prev, b), delta + 1e-12) << trial;
        EXPECT_LE(f.kl, delta);
        ++checked;
    }
    EXPECT_EQ(checked, 100);
}

TEST(Fit, RotationEquivariance) {
    std::mt19937_64 rng(16);
    const EMvMParams src = random_params(2, 1.5, rng);
    const SampleBatch b = gibbs_sample(src, 3000, kBurn, 17);
    const double phi[2] = {1.1, -2.3};
    SampleBatch shifted = b;
    for (Eigen::Index k = 0; k < b.points.rows(); ++k)
        for (Eigen::Index i = 0; i < 2; ++i) shifted.points(k, i) = wrap_angle(b.points(k, i) + phi[i]);
    const EMvMParams fa = fit_weighted(b, uniform_params(2), 50.0).params;
    const EMvMParams fb = fit_weighted(shifted, uniform_params(2), 50.0).params;
    const SampleBatch sa = gibbs_sample(fa, 3000, kBurn, 18);
    SampleBatch sb = gibbs_sample(fb, 3000, kBurn, 19);
    for (Eigen::Index k = 0; k < sb.points.rows(); ++k)
        for (Eigen::Index i = 0; i < 2; ++i) sb.points(k, i) = wrap_angle(sb.points(k, i) - phi[i]);
    const double crit = 1.628 * std::sqrt(2.0 / 3000.0);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_LT(ks_two_sample(column(sa, i), column(sb, i)), crit) << i;
}
