#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>
#include <caspar/errors.hpp>
#include <caspar/linalg.hpp>
#include <caspar/structure.hpp>

namespace caspar {

enum class StopReason
{
    epsilon,
    max_steps,
    exhausted,
};

inline std::string to_string(StopReason r)
{
    switch (r) {
        case StopReason::epsilon: return "epsilon";
        case StopReason::max_steps: return "max_steps";
        case StopReason::exhausted: return "exhausted";
    }
    return "unknown";
}

struct StepwiseParams
{
    /// Stop when the chosen candidate's |x^T (X beta - y)| falls below this.
    double epsilon = 0.0;
    /// 0 selects the default min(n - 1, p).
    Index max_steps = 0;
    double rcond = default_rcond;
};

struct CasparParams
{
    double epsilon = 0.0;
    KernelSpec kernel;
    std::shared_ptr<const PredictorStructure> structure;
    Index max_steps = 0;
    double rcond = default_rcond;
};

struct StepRecord
{
    Index index = 0;
    /// Unweighted C_l of the accepted candidate.
    double score = 0.0;
    /// W_l applied when it was selected (1 for plain stepwise).
    double weight = 1.0;
    /// RSS after the candidate was added.
    double rss = 0.0;
};

/// A candidate refused because it made the active Gram matrix singular.
struct SkippedCandidate
{
    Index step = 0;
    Index index = 0;
    double score = 0.0;
};

struct FitPath
{
    IndexSet selected;
    std::vector<StepRecord> steps;
    std::vector<CoefficientVector> coefficients_per_step;
    CoefficientVector final;
    StopReason stop_reason = StopReason::exhausted;
    /// C of the candidate that ended the fit (epsilon stop or zero score), NaN otherwise.
    double terminal_score = std::numeric_limits<double>::quiet_NaN();
    double initial_rss = 0.0;
    std::vector<SkippedCandidate> skipped;
    /// max_steps actually used.
    Index step_cap = 0;
};

namespace detail {

inline Index resolve_max_steps(const Dataset& data, Index requested)
{
    const Index cap = std::max<Index>(1, std::min(data.n() - 1, data.p()));
    if (requested == 0) return cap;
    if (requested < 0 || requested > cap) {
        throw InvalidArgument("max_steps must lie in [1, " + std::to_string(cap) + "]");
    }
    return requested;
}

/**
 * Shared greedy loop. `weights_for(active)` returns the per-candidate
 * multiplier, or an empty vector for uniform weights. Selection maximizes
 * W_l * C_l over inactive l with ties to the lowest index; stopping tests
 * the unweighted C_l of each examined candidate.
 */
template <class WeightFn>
FitPath greedy_fit(const Dataset& data, double epsilon, Index max_steps, double rcond,
                   WeightFn&& weights_for)
{
    if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be non-negative");
    const Index p = data.p();
    FitPath path;
    path.step_cap = resolve_max_steps(data, max_steps);
    path.initial_rss = data.y().squaredNorm();

    ActiveLeastSquares ls(data.X(), data.y(), rcond);
    std::vector<char> in_model(static_cast<std::size_t>(p), 0);
    std::vector<char> refused(static_cast<std::size_t>(p), 0);
    Vector scores(p);

    for (Index step = 0;; ++step) {
        if (step >= path.step_cap) {
            path.stop_reason = StopReason::max_steps;
            break;
        }
        scores.noalias() = (data.X().transpose() * ls.residual()).cwiseAbs();
        const Vector w = weights_for(ls.active());
        const bool weighted = w.size() > 0;
        std::fill(refused.begin(), refused.end(), 0);

        bool accepted = false;
        bool stopped = false;
        while (true) {
            Index best = -1;
            double best_val = -1.0;
            for (Index l = 0; l < p; ++l) {
                if (in_model[static_cast<std::size_t>(l)] || refused[static_cast<std::size_t>(l)]) continue;
                const double v = weighted ? w(l) * scores(l) : scores(l);
                if (v > best_val) {
                    best_val = v;
                    best = l;
                }
            }
            if (best < 0) break;
            const double c = scores(best);
            if (c < epsilon) {
                path.stop_reason = StopReason::epsilon;
                path.terminal_score = c;
                stopped = true;
                break;
            }
            if (!(c > 0.0)) {
                path.terminal_score = c;
                break;
            }
            if (!ls.try_add(best)) {
                refused[static_cast<std::size_t>(best)] = 1;
                path.skipped.push_back({step, best, c});
                continue;
            }
            in_model[static_cast<std::size_t>(best)] = 1;
            path.selected.push_back(best);
            path.steps.push_back({best, c, weighted ? w(best) : 1.0, ls.rss()});
            path.coefficients_per_step.emplace_back(ls.coefficients());
            accepted = true;
            break;
        }
        if (stopped) break;
        if (!accepted) {
            path.stop_reason = StopReason::exhausted;
            break;
        }
    }
    path.final = path.coefficients_per_step.empty() ? CoefficientVector::zeros(p)
                                                    : path.coefficients_per_step.back();
    return path;
}

} // namespace detail

/// Forward stepwise regression with OLS refits on the active set.
inline FitPath stepwise_fit(const Dataset& data, const StepwiseParams& params)
{
    return detail::greedy_fit(data, params.epsilon, params.max_steps, params.rcond,
                              [](const IndexSet&) { return Vector(); });
}

/// Forward stepwise with Stetson-kernel reweighting of the selection scores.
inline FitPath caspar_fit(const Dataset& data, const CasparParams& params)
{
    if (!params.structure) throw InvalidArgument("CaSpaR needs a predictor structure");
    if (params.structure->size() != data.p()) {
        throw DimensionMismatch("predictor structure covers " + std::to_string(params.structure->size())
                                + " predictors but the design has " + std::to_string(data.p()));
    }
    params.kernel.validate();
    const auto& structure = *params.structure;
    const auto& kernel = params.kernel;
    return detail::greedy_fit(data, params.epsilon, params.max_steps, params.rcond,
                              [&](const IndexSet& active) {
                                  return candidate_weights(active, kernel, structure);
                              });
}

/**
 * The path a fit with a larger threshold would have produced.
 *
 * Exact for any epsilon >= the threshold `path` was computed with, because
 * every step up to the stopping point is identical: a step stops at the
 * first examined candidate (skipped or accepted) whose score is below
 * epsilon.
 */
inline FitPath truncate_path(const FitPath& path, double epsilon)
{
    const auto examined_below = [&](Index step, double accepted_score) {
        for (const auto& s : path.skipped) {
            if (s.step == step && s.score < epsilon) return true;
        }
        return accepted_score < epsilon;
    };

    FitPath out;
    out.initial_rss = path.initial_rss;
    out.step_cap = path.step_cap;
    const auto n_steps = static_cast<Index>(path.steps.size());
    Index stop_at = n_steps;
    for (Index k = 0; k < n_steps; ++k) {
        if (examined_below(k, path.steps[static_cast<std::size_t>(k)].score)) {
            stop_at = k;
            break;
        }
    }
    bool epsilon_stop = stop_at < n_steps;
    if (!epsilon_stop) {
        // Terminal step: its skipped candidates and the triggering score.
        const double term = std::isnan(path.terminal_score) ? std::numeric_limits<double>::infinity()
                                                            : path.terminal_score;
        epsilon_stop = examined_below(n_steps, term);
    }
    for (Index k = 0; k < stop_at; ++k) {
        const auto i = static_cast<std::size_t>(k);
        out.selected.push_back(path.selected[i]);
        out.steps.push_back(path.steps[i]);
        out.coefficients_per_step.push_back(path.coefficients_per_step[i]);
    }
    for (const auto& s : path.skipped) {
        if (s.step < stop_at || (s.step == stop_at && s.score >= epsilon)) {
            out.skipped.push_back(s);
        } else if (s.step == stop_at) {
            break;
        }
    }
    if (epsilon_stop) {
        out.stop_reason = StopReason::epsilon;
        // First examined candidate at the stop step with score below epsilon.
        out.terminal_score = std::numeric_limits<double>::quiet_NaN();
        for (const auto& s : path.skipped) {
            if (s.step == stop_at && s.score < epsilon) {
                out.terminal_score = s.score;
                break;
            }
        }
        if (std::isnan(out.terminal_score)) {
            out.terminal_score = stop_at < n_steps ? path.steps[static_cast<std::size_t>(stop_at)].score
                                                   : path.terminal_score;
        }
    } else {
        out.stop_reason = path.stop_reason;
        out.terminal_score = path.terminal_score;
    }
    out.final = out.coefficients_per_step.empty() ? CoefficientVector::zeros(path.final.size())
                                                  : out.coefficients_per_step.back();
    return out;
}

/// Geometric grid from lambda_max = 2 max_j |x_j^T y| down to ratio * lambda_max.
inline Vector lambda_path(const Dataset& data, int n_lambdas, double ratio)
{
    if (n_lambdas < 2) throw InvalidArgument("n_lambdas must be at least 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("lambda ratio must lie in (0, 1)");
    const double lmax = 2.0 * (data.X().transpose() * data.y()).cwiseAbs().maxCoeff();
    Vector out(n_lambdas);
    for (int i = 0; i < n_lambdas; ++i) {
        out(i) = lmax * std::pow(ratio, static_cast<double>(i) / static_cast<double>(n_lambdas - 1));
    }
    out(n_lambdas - 1) = lmax * ratio;
    return out;
}

struct LassoOptions
{
    /// Convergence: a full sweep whose largest coefficient change is below tol.
    double tol = 1e-10;
    int max_iters = 100000;
};

namespace detail {

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// One coordinate sweep over `coords`; returns the largest |change|.
inline double lasso_sweep(const Matrix& X, const Vector& col_sq, double lambda,
                          const std::vector<Index>& coords, Vector& beta, Vector& r)
{
    double max_change = 0.0;
    for (auto j : coords) {
        const double nj = col_sq(j);
        if (!(nj > 0.0)) continue;
        const double old = beta(j);
        const double z = X.col(j).dot(r) + nj * old;
        const double nb = soft_threshold(z, 0.5 * lambda) / nj;
        if (nb != old) {
            r.noalias() -= (nb - old) * X.col(j);
            beta(j) = nb;
            max_change = std::max(max_change, std::abs(nb - old));
        }
    }
    return max_change;
}

inline Vector lasso_solve(const Dataset& data, const Vector& col_sq, double lambda,
                          const LassoOptions& opts, Vector beta)
{
    const Matrix& X = data.X();
    const Index p = data.p();
    Vector r = data.y() - X * beta;
    std::vector<Index> all(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;

    int iters = 0;
    while (iters < opts.max_iters) {
        ++iters;
        const double full_change = lasso_sweep(X, col_sq, lambda, all, beta, r);
        if (full_change < opts.tol) return beta;
        // Iterate on the current nonzero set until it settles, then re-check all.
        std::vector<Index> active;
        for (Index j = 0; j < p; ++j) {
            if (beta(j) != 0.0) active.push_back(j);
        }
        while (iters < opts.max_iters) {
            ++iters;
            if (lasso_sweep(X, col_sq, lambda, active, beta, r) < opts.tol) break;
        }
    }
    throw NoConvergence("lasso coordinate descent did not converge in "
                        + std::to_string(opts.max_iters) + " sweeps");
}

} // namespace detail

/**
 * Lasso by cyclic coordinate descent on
 *
 *     ||y - X beta||^2 + lambda ||beta||_1
 *
 * (no 1/2 or 1/n factor), so the update is
 * beta_j = S(x_j^T r_(-j), lambda / 2) / ||x_j||^2.
 */
inline CoefficientVector lasso_fit(const Dataset& data, double lambda, const LassoOptions& opts = {})
{
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
    const Vector col_sq = data.X().colwise().squaredNorm().transpose();
    return CoefficientVector(detail::lasso_solve(data, col_sq, lambda, opts, Vector::Zero(data.p())));
}

inline CoefficientVector lasso_fit(const Dataset& data, double lambda, double tol, int max_iters)
{
    return lasso_fit(data, lambda, LassoOptions{tol, max_iters});
}

/// Fits along `lambdas` (in the given order) with warm starts.
inline std::vector<CoefficientVector> lasso_path(const Dataset& data, const Vector& lambdas,
                                                 const LassoOptions& opts = {})
{
    const Vector col_sq = data.X().colwise().squaredNorm().transpose();
    std::vector<CoefficientVector> out;
    out.reserve(static_cast<std::size_t>(lambdas.size()));
    Vector beta = Vector::Zero(data.p());
    for (Index i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas(i) >= 0.0)) throw InvalidArgument("lambda must be non-negative");
        beta = detail::lasso_solve(data, col_sq, lambdas(i), opts, std::move(beta));
        out.emplace_back(beta);
    }
    return out;
}

/// Largest KKT violation of `beta` for the un-halved lasso objective.
inline double lasso_kkt_violation(const Dataset& data, const Vector& beta, double lambda)
{
    const Vector g = 2.0 * (data.X().transpose() * (data.y() - data.X() * beta));
    double worst = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        const double v = beta(j) == 0.0 ? std::max(0.0, std::abs(g(j)) - lambda)
                                        : std::abs(g(j) - lambda * (beta(j) > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

inline double lasso_objective(const Dataset& data, const Vector& beta, double lambda)
{
    return (data.y() - data.X() * beta).squaredNorm() + lambda * beta.lpNorm<1>();
}

} // namespace caspar
