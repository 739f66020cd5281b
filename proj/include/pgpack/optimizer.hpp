#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pgpack/emvm.hpp"
#include "pgpack/packing.hpp"
#include "pgpack/parallel.hpp"
#include "pgpack/symmetry.hpp"

namespace pgpack {

struct SearchSettings {
    std::size_t max_iterations = 8000;  // per run; refinement rounds each get the same cap
    double kl_budget = 1.0;
    double kl_floor = 1e-3;
    std::size_t kl_patience = 50;  // iterations without improvement before the budget is halved
    double elite_fraction = 0.1;
    std::size_t refine_rounds = 30;
    double refine_shrink = 0.75;
    double epsilon0 = 0.1;
    std::uint64_t seed = 0;
    int neighbor_block = 5;
    std::size_t burn_in = 30;
    std::size_t stagnation_limit = 500;
    double concentration_stop = 0.999;
    double tau_relative = 1e-9;  // contact tolerance as a fraction of the motif circumradius
    std::optional<Bounds> bounds;
    unsigned threads = 0;
    bool verbose = false;

    static SearchSettings full() { return {}; }
    static SearchSettings fast() {
        SearchSettings s;
        s.max_iterations = 2000;
        s.refine_rounds = 15;
        return s;
    }

    void validate() const {
        if (max_iterations == 0 || refine_rounds == 0 || burn_in == 0 || neighbor_block < 1 || stagnation_limit == 0)
            throw std::invalid_argument("search counts must be positive");
        if (!(elite_fraction > 0.0 && elite_fraction <= 1.0)) throw std::invalid_argument("elite fraction must be in (0, 1]");
        if (!(refine_shrink > 0.0 && refine_shrink < 1.0)) throw std::invalid_argument("refine shrink must be in (0, 1)");
        if (!(epsilon0 > 0.0)) throw std::invalid_argument("epsilon0 must be positive");
        if (!(kl_budget > 0.0) || !(kl_floor > 0.0)) throw std::invalid_argument("kl budget must be positive");
    }
};

struct Evaluation {
    Configuration config;
    std::vector<double> dof;  // parameter values in layout order
    PackingReport report;
};

struct TraceRow {
    std::size_t iteration = 0;
    double best_density = 0.0;  // 0 until a feasible candidate is seen
    double mean_violation = 0.0;
    double min_concentration = 0.0;
};

struct SearchResult {
    Configuration best;
    PackingReport report;
    std::vector<TraceRow> trace;
    std::size_t iterations_used = 0;
    bool converged = false;
    std::size_t refine_shrinks = 0;  // number of times the refinement neighbourhood was lowered
};

class SearchFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Feasible candidates first by density (descending), then infeasible ones by
// violation (ascending); ties by the lexicographic parameter vector.
inline std::vector<std::size_t> rank_batch(std::span<const Evaluation> evals) {
    if (evals.empty()) throw std::invalid_argument("cannot rank an empty batch");
    std::vector<std::size_t> order(evals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const PackingReport& a = evals[x].report;
        const PackingReport& b = evals[y].report;
        if (a.feasible != b.feasible) return a.feasible;
        if (a.feasible) {
            if (a.density != b.density) return a.density > b.density;
        } else if (a.violation != b.violation) {
            return a.violation < b.violation;
        }
        if (evals[x].dof != evals[y].dof) return evals[x].dof < evals[y].dof;
        return x < y;
    });
    return order;
}

inline Evaluation evaluate(const Configuration& c, const DofLayout& layout, double tau, int block) {
    Evaluation e;
    e.config = c;
    e.dof = dof_values(c, layout);
    e.report.density = density(c);
    e.report.violation = PeriodicPacking(c, block).violation();
    e.report.feasible = e.report.violation <= tau;
    return e;
}

namespace detail {

struct RunOutcome {
    std::optional<Evaluation> best;
    std::vector<TraceRow> trace;
    std::size_t iterations = 0;
    bool converged = false;
};

// Torus points that decode to congruent packings. Bounded axes are folded onto
// theta in [0, pi]; fractional axes along which any translation maps the group
// onto itself are pinned to a reference value; the remaining pose freedom (orbit
// images combined with normaliser translations) is resolved by choosing the image
// closest to the reference.
class Canonicalizer {
public:
    explicit Canonicalizer(const DofLayout& layout) : layout_(layout) {
        const PlaneGroupSpec& g = group_spec(layout.group);
        free_x_ = normalises(g, {0.3718, 0.0});
        free_y_ = normalises(g, {0.0, 0.4127});
        std::vector<Vec2> shifts;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                const Vec2 t{free_x_ ? 0.0 : i / 6.0, free_y_ ? 0.0 : j / 6.0};
                if (!normalises(g, t)) continue;
                bool seen = false;
                for (Vec2 u : shifts) seen = seen || (u.x == t.x && u.y == t.y);
                if (!seen) shifts.push_back(t);
            }
        for (const SymOp& op : g.ops)
            for (Vec2 t : shifts) {
                SymOp m = op;
                m.t = wrap_unit(op.t + t);
                poses_.push_back(m);
            }
        for (std::size_t k = 0; k < layout.count(); ++k) {
            const AxisMap& a = layout.axes[k];
            if (!a.periodic) continue;
            if (a.kind == DofKind::frac_x) fx_ = int(k);
            if (a.kind == DofKind::frac_y) fy_ = int(k);
            if (a.kind == DofKind::motif_angle) rot_ = int(k);
        }
    }

    void apply(Eigen::Ref<Eigen::RowVectorXd> theta, const std::vector<double>& reference) const {
        for (std::size_t k = 0; k < layout_.count(); ++k) {
            const AxisMap& a = layout_.axes[k];
            if (pinned(a)) {
                theta[Eigen::Index(k)] = reference[k];
            } else if (!a.periodic) {
                theta[Eigen::Index(k)] = std::abs(wrap_angle(theta[Eigen::Index(k)] + kPi) - kPi);
            }
        }
        if (fx_ < 0 && fy_ < 0) return;
        const double period = layout_.motif.is_disc() ? 1.0 : layout_.motif.rotation_period();
        const Vec2 f{fx_ >= 0 ? theta[fx_] / kTwoPi : 0.0, fy_ >= 0 ? theta[fy_] / kTwoPi : 0.0};
        const double r = rot_ >= 0 ? theta[rot_] / kTwoPi * period : 0.0;
        const CellParams cell = decode(std::span<const double>(theta.data(), layout_.count()), layout_).cell;
        double best = std::numeric_limits<double>::infinity();
        Eigen::RowVectorXd chosen = theta;
        for (const SymOp& op : poses_) {
            const auto [g, rr] = transform_pose(op, cell, f, r, layout_.motif);
            Eigen::RowVectorXd cand = theta;
            if (fx_ >= 0) cand[fx_] = g.x * kTwoPi;
            if (fy_ >= 0) cand[fy_] = g.y * kTwoPi;
            if (rot_ >= 0) cand[rot_] = rr / period * kTwoPi;
            double d = 0.0;
            for (int k : {fx_, fy_, rot_}) {
                if (k < 0) continue;
                const double e = wrap_angle(cand[k] - reference[std::size_t(k)] + kPi) - kPi;
                d += e * e;
            }
            if (d < best) {
                best = d;
                chosen = cand;
            }
        }
        theta = chosen;
    }

    bool pinned(const AxisMap& a) const {
        return (a.kind == DofKind::frac_x && free_x_) || (a.kind == DofKind::frac_y && free_y_);
    }

private:
    static bool normalises(const PlaneGroupSpec& g, Vec2 t) {
        for (const SymOp& op : g.ops) {
            SymOp image = op;
            const Vec2 mt = op.apply(t) - op.t;
            image.t = wrap_unit(op.t + mt - t);
            bool found = false;
            for (const SymOp& other : g.ops) found = found || same_op(image, other, 1e-9);
            if (!found) return false;
        }
        return true;
    }

    DofLayout layout_;
    std::vector<SymOp> poses_;
    bool free_x_ = false, free_y_ = false;
    int fx_ = -1, fy_ = -1, rot_ = -1;
};

inline std::vector<double> rank_weights(std::size_t elites) {
    std::vector<double> w(elites);
    const double total = double(elites) * double(elites + 1) / 2.0;
    for (std::size_t r = 0; r < elites; ++r) w[r] = double(elites - r) / total;
    return w;
}

// One trust-region run on the torus described by `layout`, starting from the uniform distribution.
inline RunOutcome run_etrpa(const DofLayout& layout, const DofLayout& value_layout, const SearchSettings& s,
                            std::uint64_t run_id) {
    const std::size_t dim = layout.count();
    const std::size_t p = emvm_param_count(dim);
    const std::size_t count = batch_size(p);
    const std::size_t elites = std::max<std::size_t>(2, std::size_t(std::ceil(s.elite_fraction * double(count))));
    const std::vector<double> weights = rank_weights(std::min(elites, count));
    const double tau = s.tau_relative * layout.motif.circumradius;

    RunOutcome out;
    EMvMParams params = uniform_params(dim);
    PointMatrix starts;
    double budget = s.kl_budget;
    double best_density = 0.0;
    std::size_t last_improvement = 0, last_budget_change = 0;
    std::vector<Evaluation> evals(count);
    const Canonicalizer canon(layout);

    for (std::size_t it = 0; it < s.max_iterations; ++it) {
        const std::uint64_t stream = (run_id << 32) | std::uint64_t(it);
        SampleBatch batch = gibbs_sample(params, count, s.burn_in, s.seed, stream, starts.rows() ? &starts : nullptr,
                                         s.threads);
        parallel_for(
            count,
            [&](std::size_t k) {
                const auto row = batch.points.row(Eigen::Index(k));
                const Configuration c = decode(std::span<const double>(row.data(), dim), layout);
                evals[k] = evaluate(c, value_layout, tau, s.neighbor_block);
            },
            s.threads);

        const std::vector<std::size_t> order = rank_batch(evals);
        const Evaluation& top = evals[order.front()];
        if (top.report.feasible && (!out.best || top.report.density > best_density)) {
            if (out.best && top.report.density > best_density * (1.0 + 1e-12)) last_improvement = it;
            if (!out.best) last_improvement = it;
            out.best = top;
            best_density = top.report.density;
        }

        TraceRow row;
        row.iteration = it;
        row.best_density = best_density;
        for (const auto& e : evals) row.mean_violation += e.report.violation;
        row.mean_violation /= double(count);
        const std::vector<double> conc = concentration(batch);
        row.min_concentration = *std::min_element(conc.begin(), conc.end());
        out.trace.push_back(row);
        out.iterations = it + 1;
        if (s.verbose && it % 50 == 0)
            std::cerr << "  [run " << run_id << "] it " << it << " best " << best_density << " min R "
                      << row.min_concentration << " kl " << budget << "\n";

        if (row.min_concentration >= s.concentration_stop) {
            out.converged = true;
            break;
        }
        if (out.best && it - last_improvement >= s.stagnation_limit) break;
        if (it - std::max(last_improvement, last_budget_change) >= s.kl_patience) {
            budget = std::max(s.kl_floor, 0.5 * budget);
            last_budget_change = it;
        }

        SampleBatch targets;
        targets.points.resize(Eigen::Index(weights.size()), Eigen::Index(dim));
        targets.weights.resize(Eigen::Index(weights.size()));
        for (std::size_t r = 0; r < weights.size(); ++r) {
            targets.points.row(Eigen::Index(r)) = batch.points.row(Eigen::Index(order[r]));
            targets.weights[Eigen::Index(r)] = weights[r];
        }
        std::vector<double> reference = circular_mean(batch);
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index r = 0; r < targets.points.rows(); ++r) canon.apply(targets.points.row(r), reference);
            reference = circular_mean(targets);
        }
        params = fit_weighted(targets, batch.points, params, budget).params;
        starts = std::move(targets.points);
    }
    return out;
}

}  // namespace detail

// Uniform start on the full parameter torus, iterated until the sampling
// distribution collapses to a point or the iteration cap is hit.
inline SearchResult etrpa_search(const Shape& motif, PlaneGroup group, const SearchSettings& settings) {
    settings.validate();
    const DofLayout layout = dof_layout(group, motif, settings.bounds);
    detail::RunOutcome run = detail::run_etrpa(layout, layout, settings, 0);
    if (!run.best) throw SearchFailure("no feasible configuration found for " + std::string(group_name(group)));
    SearchResult r;
    r.best = run.best->config;
    r.report = verify(r.best, settings.tau_relative * motif.circumradius, settings.neighbor_block);
    r.trace = std::move(run.trace);
    r.iterations_used = run.iterations;
    r.converged = run.converged;
    return r;
}

// Restarts the search in toroidal boxes around the incumbent. An improving round
// recentres the box; otherwise the box shrinks, until it has been lowered
// `refine_rounds` times (at most twice that many rounds in total).
inline SearchResult refine(const SearchResult& result, const Shape& motif, PlaneGroup group,
                           const SearchSettings& settings) {
    settings.validate();
    const double tau = settings.tau_relative * motif.circumradius;
    if (!verify(result.best, tau, settings.neighbor_block).feasible)
        throw std::invalid_argument("refine needs a feasible incumbent");
    const DofLayout full = dof_layout(group, motif, settings.bounds);

    SearchResult out = result;
    std::vector<double> center = dof_values(out.best, full);
    double best_density = density(out.best);
    double eps = settings.epsilon0;
    std::size_t shrinks = 0, rounds = 0, offset = out.iterations_used;
    while (shrinks < settings.refine_rounds && rounds < 2 * settings.refine_rounds) {
        const DofLayout box = restrict_layout(full, center, eps);
        detail::RunOutcome run = detail::run_etrpa(box, full, settings, rounds + 1);
        for (TraceRow row : run.trace) {
            row.iteration += offset;
            row.best_density = std::max(row.best_density, best_density);
            out.trace.push_back(row);
        }
        offset += run.iterations;
        out.iterations_used += run.iterations;
        if (run.best && run.best->report.density > best_density) {
            out.best = run.best->config;
            best_density = run.best->report.density;
            center = dof_values(out.best, full);
        } else {
            eps *= settings.refine_shrink;
            ++shrinks;
        }
        if (settings.verbose)
            std::cerr << "refine round " << rounds << " eps " << eps << " best " << best_density << "\n";
        ++rounds;
    }
    out.refine_shrinks = shrinks;
    out.report = verify(out.best, tau, settings.neighbor_block);
    return out;
}

inline SearchResult search_and_refine(const Shape& motif, PlaneGroup group, const SearchSettings& settings) {
    return refine(etrpa_search(motif, group, settings), motif, group, settings);
}

// ---------------------------------------------------------------------------
// Rank table

struct RankEntry {
    PlaneGroup group;
    double density;
    int rank;
};

struct RankTable {
    std::map<int, std::vector<RankEntry>> by_n;  // n = 0 is the disc
    std::vector<std::pair<PlaneGroup, int>> missing;
};

// Groups ordered by density per n; densities within `tie` of the first member of
// a rank share it, and ranks are consecutive (1..r_max).
inline RankTable rank_table(const std::map<std::pair<PlaneGroup, int>, double>& densities, std::span<const int> n_values,
                            std::span<const PlaneGroup> groups = kAllGroups, double tie = 5e-4) {
    RankTable t;
    for (int n : n_values) {
        std::vector<RankEntry> row;
        for (PlaneGroup g : groups) {
            const auto it = densities.find({g, n});
            if (it == densities.end()) {
                t.missing.emplace_back(g, n);
                continue;
            }
            row.push_back({g, it->second, 0});
        }
        std::stable_sort(row.begin(), row.end(), [](const RankEntry& a, const RankEntry& b) { return a.density > b.density; });
        int rank = 0;
        double leader = 0.0;
        for (auto& e : row) {
            if (rank == 0 || leader - e.density >= tie) {
                ++rank;
                leader = e.density;
            }
            e.rank = rank;
        }
        t.by_n[n] = std::move(row);
    }
    return t;
}

}  // namespace pgpack
