#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pgpack/geometry.hpp"
#include "pgpack/parallel.hpp"

namespace pgpack {

// Extended multivariate von Mises family on the n-torus:
//   f(theta) ∝ exp( sum_i a_i cos t_i + b_i sin t_i
//                 + sum_{i<j} c_ij cos t_i cos t_j + d_ij sin t_i sin t_j
//                            + e_ij cos t_i sin t_j + g_ij sin t_i cos t_j ).
// Coefficients are stored as [a_0, b_0, a_1, b_1, ..., (c, d, e, g) for each pair i<j
// in lexicographic order].
inline std::size_t emvm_param_count(std::size_t dim) { return 2 * dim + 2 * dim * (dim - 1); }

inline std::size_t emvm_pair_offset(std::size_t i, std::size_t j, std::size_t dim) {
    // i < j; index of the pair among all pairs in lexicographic order
    const std::size_t before = i * dim - i * (i + 1) / 2;
    return 2 * dim + 4 * (before + (j - i - 1));
}

struct EMvMParams {
    std::size_t dim = 0;
    Eigen::VectorXd coef;

    std::size_t size() const { return std::size_t(coef.size()); }
    double a(std::size_t i) const { return coef[2 * i]; }
    double b(std::size_t i) const { return coef[2 * i + 1]; }
};

inline EMvMParams uniform_params(std::size_t dim) {
    if (dim < 1) throw std::invalid_argument("torus dimension must be at least 1");
    return {dim, Eigen::VectorXd::Zero(Eigen::Index(emvm_param_count(dim)))};
}

// Samples per iteration: smallest N with p / N < 0.07, rounded up to a multiple of 16.
inline std::size_t batch_size(std::size_t p) {
    if (p < 2) throw std::invalid_argument("parameter count must be at least 2");
    std::size_t n = std::size_t(std::floor(double(p) / 0.07)) + 1;
    while (!(double(p) / double(n) < 0.07)) ++n;
    return (n + 15) / 16 * 16;
}

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SampleBatch {
    PointMatrix points;       // one row per sample, angles in [0, 2pi)
    Eigen::VectorXd weights;  // non-negative, sum to 1
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    std::size_t size() const { return std::size_t(points.rows()); }
    std::size_t dim() const { return std::size_t(points.cols()); }
};

inline void set_uniform_weights(SampleBatch& batch) {
    batch.weights = Eigen::VectorXd::Constant(batch.points.rows(), 1.0 / double(batch.points.rows()));
}

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent generator seed for (seed, stream, index); used per chain so that
// scheduling never changes the draws.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ (index * 0xd1b54a32d192ed03ULL));
}

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// ---------------------------------------------------------------------------
// Bessel helpers

// I1(k) / I0(k), the mean resultant length of von Mises(., k).
inline double bessel_ratio(double kappa) {
    kappa = std::abs(kappa);
    if (kappa < 1e-8) return 0.5 * kappa;
    if (kappa <= 500.0) return std::cyl_bessel_i(1.0, kappa) / std::cyl_bessel_i(0.0, kappa);
    const double k = 1.0 / kappa;
    return 1.0 - 0.5 * k - 0.125 * k * k - 0.125 * k * k * k;
}

inline double log_bessel_i0(double kappa) {
    kappa = std::abs(kappa);
    if (kappa <= 500.0) return std::log(std::cyl_bessel_i(0.0, kappa));
    const double k = 1.0 / kappa;
    return kappa - 0.5 * std::log(kTwoPi * kappa) + std::log1p(0.125 * k + 9.0 / 128.0 * k * k);
}

// Best-Fisher rejection sampler; wrapped normal for very large concentration.
inline double sample_von_mises(double mu, double kappa, Rng& rng) {
    if (kappa < 1e-8) return kTwoPi * uniform01(rng);
    if (kappa > 1e6) {
        const double z = std::normal_distribution<double>(0.0, 1.0 / std::sqrt(kappa))(rng);
        return wrap_angle(mu + z);
    }
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    for (;;) {
        const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
        const double z = std::cos(kPi * u1);
        const double f = (1.0 + r * z) / (r + z);
        const double c = kappa * (r - f);
        if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
            const double t = std::acos(std::clamp(f, -1.0, 1.0));
            return wrap_angle(u3 > 0.5 ? mu + t : mu - t);
        }
    }
}

// ---------------------------------------------------------------------------
// Density pieces

inline Eigen::VectorXd sufficient_stats(std::span<const double> theta) {
    const std::size_t n = theta.size();
    Eigen::VectorXd t(Eigen::Index(emvm_param_count(n)));
    std::vector<double> c(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = std::cos(theta[i]);
        s[i] = std::sin(theta[i]);
        t[2 * i] = c[i];
        t[2 * i + 1] = s[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::size_t o = emvm_pair_offset(i, j, n);
            t[o] = c[i] * c[j];
            t[o + 1] = s[i] * s[j];
            t[o + 2] = c[i] * s[j];
            t[o + 3] = s[i] * c[j];
        }
    }
    return t;
}

inline double log_unnormalized(const EMvMParams& p, std::span<const double> theta) {
    return p.coef.dot(sufficient_stats(theta));
}

// Natural parameters (A, B) of the von Mises full conditional of coordinate i,
// from cached cosines and sines of all coordinates.
inline std::pair<double, double> conditional_params(const EMvMParams& p, std::span<const double> cs,
                                                    std::span<const double> sn, std::size_t i) {
    const std::size_t n = p.dim;
    double A = p.a(i), B = p.b(i);
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        if (i < j) {
            const std::size_t o = emvm_pair_offset(i, j, n);
            A += p.coef[o] * cs[j] + p.coef[o + 2] * sn[j];
            B += p.coef[o + 1] * sn[j] + p.coef[o + 3] * cs[j];
        } else {
            const std::size_t o = emvm_pair_offset(j, i, n);
            A += p.coef[o] * cs[j] + p.coef[o + 3] * sn[j];
            B += p.coef[o + 1] * sn[j] + p.coef[o + 2] * cs[j];
        }
    }
    return {A, B};
}

namespace detail {

// Sparse rows of d(A_i)/d(coef) and d(B_i)/d(coef) at one point.
struct ConditionalJacobian {
    std::vector<std::size_t> idx_a, idx_b;
    std::vector<double> val_a, val_b;

    void build(std::size_t n, std::size_t i, std::span<const double> cs, std::span<const double> sn) {
        idx_a.assign({2 * i});
        val_a.assign({1.0});
        idx_b.assign({2 * i + 1});
        val_b.assign({1.0});
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (i < j) {
                const std::size_t o = emvm_pair_offset(i, j, n);
                idx_a.insert(idx_a.end(), {o, o + 2});
                val_a.insert(val_a.end(), {cs[j], sn[j]});
                idx_b.insert(idx_b.end(), {o + 1, o + 3});
                val_b.insert(val_b.end(), {sn[j], cs[j]});
            } else {
                const std::size_t o = emvm_pair_offset(j, i, n);
                idx_a.insert(idx_a.end(), {o, o + 3});
                val_a.insert(val_a.end(), {cs[j], sn[j]});
                idx_b.insert(idx_b.end(), {o + 1, o + 2});
                val_b.insert(val_b.end(), {sn[j], cs[j]});
            }
        }
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Sampling

// Gibbs sampler: one independent chain per output row. Each full conditional is
// von Mises(atan2(B_i, A_i), hypot(A_i, B_i)). Chains start from `starts`
// (cycled) when given, otherwise from the first-order marginals.
inline SampleBatch gibbs_sample(const EMvMParams& params, std::size_t count, std::size_t burn_in,
                                std::uint64_t seed, std::uint64_t stream = 0,
                                const PointMatrix* starts = nullptr, unsigned threads = 0) {
    if (count < 1) throw std::invalid_argument("sample count must be positive");
    const std::size_t n = params.dim;
    SampleBatch batch;
    batch.seed = seed;
    batch.stream = stream;
    batch.points.resize(Eigen::Index(count), Eigen::Index(n));
    const std::size_t sweeps = std::max<std::size_t>(burn_in, 1);
    parallel_for(
        count,
        [&](std::size_t k) {
            Rng rng(stream_seed(seed, stream, k));
            std::vector<double> th(n), cs(n), sn(n);
            if (starts && starts->rows() > 0) {
                for (std::size_t i = 0; i < n; ++i) th[i] = (*starts)(Eigen::Index(k % starts->rows()), Eigen::Index(i));
            } else {
                for (std::size_t i = 0; i < n; ++i)
                    th[i] = sample_von_mises(std::atan2(params.b(i), params.a(i)), std::hypot(params.a(i), params.b(i)), rng);
            }
            for (std::size_t i = 0; i < n; ++i) {
                cs[i] = std::cos(th[i]);
                sn[i] = std::sin(th[i]);
            }
            for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
                for (std::size_t i = 0; i < n; ++i) {
                    const auto [A, B] = conditional_params(params, cs, sn, i);
                    th[i] = sample_von_mises(std::atan2(B, A), std::hypot(A, B), rng);
                    cs[i] = std::cos(th[i]);
                    sn[i] = std::sin(th[i]);
                }
            }
            for (std::size_t i = 0; i < n; ++i) batch.points(Eigen::Index(k), Eigen::Index(i)) = th[i];
        },
        threads);
    set_uniform_weights(batch);
    return batch;
}

// ---------------------------------------------------------------------------
// Statistics

// Weighted mean resultant length per coordinate.
inline std::vector<double> concentration(const SampleBatch& batch) {
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
    std::vector<double> r(batch.dim());
    for (std::size_t i = 0; i < batch.dim(); ++i) {
        double c = 0.0, s = 0.0;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const double w = batch.weights[Eigen::Index(k)];
            c += w * std::cos(batch.points(Eigen::Index(k), Eigen::Index(i)));
            s += w * std::sin(batch.points(Eigen::Index(k), Eigen::Index(i)));
        }
        r[i] = std::min(1.0, std::hypot(c, s));
    }
    return r;
}

inline std::vector<double> circular_mean(const SampleBatch& batch) {
    std::vector<double> m(batch.dim());
    for (std::size_t i = 0; i < batch.dim(); ++i) {
        double c = 0.0, s = 0.0;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const double w = batch.weights[Eigen::Index(k)];
            c += w * std::cos(batch.points(Eigen::Index(k), Eigen::Index(i)));
            s += w * std::sin(batch.points(Eigen::Index(k), Eigen::Index(i)));
        }
        m[i] = wrap_angle(std::atan2(s, c));
    }
    return m;
}

// Weighted mean of the sufficient statistics.
inline Eigen::VectorXd expected_stats(const SampleBatch& batch) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(Eigen::Index(emvm_param_count(batch.dim())));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const double w = batch.weights[Eigen::Index(k)];
        if (w == 0.0) continue;
        const auto row = batch.points.row(Eigen::Index(k));
        t += w * sufficient_stats(std::span<const double>(row.data(), batch.dim()));
    }
    return t;
}

namespace detail {

// Sufficient statistics of every batch point, one row per point.
inline Eigen::MatrixXd stats_matrix(const SampleBatch& batch) {
    Eigen::MatrixXd t(batch.points.rows(), Eigen::Index(emvm_param_count(batch.dim())));
    for (Eigen::Index k = 0; k < batch.points.rows(); ++k) {
        const auto row = batch.points.row(k);
        t.row(k) = sufficient_stats(std::span<const double>(row.data(), batch.dim())).transpose();
    }
    return t;
}

// log mean exp(s) - mean(s), clamped at zero.
inline double kl_from_log_ratios(const Eigen::VectorXd& s) {
    if (s.size() == 0) return 0.0;
    const double top = s.maxCoeff();
    const double log_mean_exp = top + std::log((s.array() - top).exp().mean());
    return std::max(0.0, log_mean_exp - s.mean());
}

}  // namespace detail

// KL(old || new) estimated on points drawn from `old`:
//   E_old[log f_old - log f_new] = log E_old[exp(d.T)] - E_old[d.T],  d = new - old,
// where the log-partition ratio is the importance-sampling estimate over the same
// points. Batch weights are ignored: the points themselves are the draw from `old`.
inline double kl_estimate(const EMvMParams& next, const EMvMParams& old, const SampleBatch& batch) {
    if (next.size() != old.size()) throw std::invalid_argument("parameter dimensions differ");
    const Eigen::VectorXd delta = next.coef - old.coef;
    if (delta.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    return detail::kl_from_log_ratios(detail::stats_matrix(batch) * delta);
}

// ---------------------------------------------------------------------------
// Fitting

struct FitOutcome {
    EMvMParams params;
    double alpha = 0.0;            // accepted fraction of the full step
    double kl = 0.0;               // estimated KL(prev || params)
    bool degenerate = false;       // batch had fewer than two distinct points
    Eigen::VectorXd target_stats;  // weighted mean sufficient statistics
};

namespace detail {

// Weighted pseudo-log-likelihood sum_k w_k sum_i log f(theta_ki | theta_k,-i) (without the
// constant -log 2pi); optionally its gradient and Hessian.
inline double pseudo_loglik(const EMvMParams& p, const SampleBatch& batch, Eigen::VectorXd* grad,
                            Eigen::MatrixXd* hess) {
    const std::size_t n = p.dim;
    const Eigen::Index np = Eigen::Index(p.size());
    if (grad) grad->setZero(np);
    if (hess) hess->setZero(np, np);
    double value = 0.0;
    std::vector<double> cs(n), sn(n);
    ConditionalJacobian jac;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const double w = batch.weights[Eigen::Index(k)];
        if (w <= 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            cs[i] = std::cos(batch.points(Eigen::Index(k), Eigen::Index(i)));
            sn[i] = std::sin(batch.points(Eigen::Index(k), Eigen::Index(i)));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto [A, B] = conditional_params(p, cs, sn, i);
            const double kappa = std::hypot(A, B);
            value += w * (A * cs[i] + B * sn[i] - log_bessel_i0(kappa));
            if (!grad && !hess) continue;
            const double r = bessel_ratio(kappa);
            double ua = 1.0, ub = 0.0, r_over_k = 0.5;
            if (kappa > 1e-12) {
                ua = A / kappa;
                ub = B / kappa;
                r_over_k = r / kappa;
            }
            jac.build(n, i, cs, sn);
            if (grad) {
                const double ga = w * (cs[i] - r * ua);
                const double gb = w * (sn[i] - r * ub);
                for (std::size_t q = 0; q < jac.idx_a.size(); ++q) (*grad)[Eigen::Index(jac.idx_a[q])] += ga * jac.val_a[q];
                for (std::size_t q = 0; q < jac.idx_b.size(); ++q) (*grad)[Eigen::Index(jac.idx_b[q])] += gb * jac.val_b[q];
            }
            if (hess) {
                // Covariance of (cos, sin) under the conditional: r' u u^T + (r / k)(I - u u^T).
                const double rp = kappa > 1e-12 ? 1.0 - r_over_k - r * r : 0.5;
                const double caa = w * (rp * ua * ua + r_over_k * (1.0 - ua * ua));
                const double cbb = w * (rp * ub * ub + r_over_k * (1.0 - ub * ub));
                const double cab = w * (rp - r_over_k) * ua * ub;
                auto add_block = [&](const std::vector<std::size_t>& ia, const std::vector<double>& va,
                                     const std::vector<std::size_t>& ib, const std::vector<double>& vb, double c) {
                    for (std::size_t x = 0; x < ia.size(); ++x)
                        for (std::size_t y = 0; y < ib.size(); ++y)
                            (*hess)(Eigen::Index(ia[x]), Eigen::Index(ib[y])) -= c * va[x] * vb[y];
                };
                add_block(jac.idx_a, jac.val_a, jac.idx_a, jac.val_a, caa);
                add_block(jac.idx_b, jac.val_b, jac.idx_b, jac.val_b, cbb);
                add_block(jac.idx_a, jac.val_a, jac.idx_b, jac.val_b, cab);
                add_block(jac.idx_b, jac.val_b, jac.idx_a, jac.val_a, cab);
            }
        }
    }
    return value;
}

inline std::size_t distinct_points(const SampleBatch& batch, std::size_t stop_at = 2) {
    std::vector<Eigen::Index> reps;
    for (Eigen::Index k = 0; k < batch.points.rows(); ++k) {
        bool seen = false;
        for (Eigen::Index r : reps) {
            if ((batch.points.row(k) - batch.points.row(r)).cwiseAbs().maxCoeff() == 0.0) {
                seen = true;
                break;
            }
        }
        if (!seen) reps.push_back(k);
        if (reps.size() >= stop_at) break;
    }
    return reps.size();
}

}  // namespace detail

struct FitSettings {
    int newton_steps = 8;
    double damping = 1e-3;  // Levenberg-Marquardt factor on the Hessian diagonal
    // Quadratic penalty on the distance from the previous parameters, scaled by the
    // curvature there (plus a floor) and by p / N_eff of the weights.
    double ridge = 0.1;
    double ridge_floor = 1e-6;
};

// Moves `prev` towards the weighted pseudo-likelihood optimum of the batch and
// accepts the largest fraction alpha of that move whose estimated KL(prev || new)
// stays within `kl_budget`.
// `draws` are the points sampled from `prev` on which the KL is estimated; the
// weighted `batch` only supplies the fit target.
inline FitOutcome fit_weighted(const SampleBatch& batch, const PointMatrix& draws, const EMvMParams& prev,
                               double kl_budget, const FitSettings& fs = {}) {
    if (!(kl_budget > 0.0)) throw std::invalid_argument("kl budget must be positive");
    if (batch.dim() != prev.dim || std::size_t(draws.cols()) != prev.dim)
        throw std::invalid_argument("batch and parameter dimensions differ");
    if (draws.rows() == 0) throw std::invalid_argument("no draws for the KL estimate");
    FitOutcome out;
    out.params = prev;
    if (detail::distinct_points(batch) < 2) {
        out.degenerate = true;
        return out;
    }
    out.target_stats = expected_stats(batch);

    // Damped Newton ascent on the (concave) pseudo-log-likelihood.
    EMvMParams cur = prev;
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    detail::pseudo_loglik(cur, batch, &g, &H);
    // Penalty strength p / N_eff: negligible for large batches, firm for a few elites.
    const double n_eff = 1.0 / batch.weights.squaredNorm();
    const double strength = fs.ridge * double(prev.size()) / n_eff;
    const Eigen::VectorXd scale = strength * ((-H.diagonal()).cwiseMax(0.0).array() + fs.ridge_floor).matrix();
    auto objective = [&](const EMvMParams& q, Eigen::VectorXd* gr, Eigen::MatrixXd* he) {
        const Eigen::VectorXd d = q.coef - prev.coef;
        double v = detail::pseudo_loglik(q, batch, gr, he) - 0.5 * d.dot(scale.cwiseProduct(d));
        if (gr) *gr -= scale.cwiseProduct(d);
        if (he) he->diagonal() -= scale;
        return v;
    };
    double value = objective(cur, &g, &H);
    double lambda = fs.damping;
    for (int step = 0; step < fs.newton_steps; ++step) {
        if (g.cwiseAbs().maxCoeff() < 1e-10) break;
        bool improved = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd M = -H;
            const Eigen::VectorXd diag = M.diagonal();
            for (Eigen::Index q = 0; q < M.rows(); ++q) M(q, q) += lambda * diag[q] + 1e-9;
            const Eigen::VectorXd dir = M.ldlt().solve(g);
            if (!dir.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            EMvMParams trial{cur.dim, cur.coef + dir};
            const double tv = objective(trial, nullptr, nullptr);
            if (std::isfinite(tv) && tv >= value) {
                cur = std::move(trial);
                value = tv;
                lambda = std::max(lambda * 0.3, 1e-6);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
        value = objective(cur, &g, &H);
    }

    // Trust region: KL(prev || prev + alpha * step) is non-decreasing in alpha.
    const Eigen::VectorXd step = cur.coef - prev.coef;
    SampleBatch sampled;
    sampled.points = draws;
    const Eigen::VectorXd ratios = detail::stats_matrix(sampled) * step;
    auto at = [&](double alpha) { return EMvMParams{prev.dim, prev.coef + alpha * step}; };
    const double kl_full = detail::kl_from_log_ratios(ratios);
    if (kl_full <= kl_budget) {
        out.params = cur;
        out.alpha = 1.0;
        out.kl = kl_full;
        return out;
    }
    double lo = 0.0, hi = 1.0, kl_lo = 0.0;
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double k = detail::kl_from_log_ratios(mid * ratios);
        if (k <= kl_budget) {
            lo = mid;
            kl_lo = k;
        } else {
            hi = mid;
        }
    }
    out.params = at(lo);
    out.alpha = lo;
    out.kl = kl_lo;
    return out;
}

inline FitOutcome fit_weighted(const SampleBatch& batch, const EMvMParams& prev, double kl_budget,
                               const FitSettings& fs = {}) {
    return fit_weighted(batch, batch.points, prev, kl_budget, fs);
}

}  // namespace pgpack
