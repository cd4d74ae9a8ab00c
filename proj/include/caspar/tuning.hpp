#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>
#include <caspar/errors.hpp>
#include <caspar/linalg.hpp>
#include <caspar/parallel.hpp>
#include <caspar/rng.hpp>
#include <caspar/solvers.hpp>
#include <caspar/structure.hpp>

namespace caspar {

enum class Method
{
    stepwise,
    caspar,
    lasso,
};

inline std::string to_string(Method m)
{
    switch (m) {
        case Method::stepwise: return "stepwise";
        case Method::caspar: return "caspar";
        case Method::lasso: return "lasso";
    }
    return "unknown";
}

inline Method parse_method(const std::string& s)
{
    if (s == "stepwise") return Method::stepwise;
    if (s == "caspar") return Method::caspar;
    if (s == "lasso") return Method::lasso;
    throw InvalidArgument("unknown method '" + s + "'");
}

/// Everything about a solver except the tuned parameters.
struct SolverSpec
{
    Method method = Method::stepwise;
    KernelFamily family = KernelFamily::boxcar;
    std::shared_ptr<const PredictorStructure> structure;
    Index max_steps = 0;
    bool standardize = true;
    double rcond = default_rcond;
    LassoOptions lasso;
};

/// One tuning point; fields a method does not use are NaN.
struct GridPoint
{
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double h = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
};

struct CvPlan
{
    int n_folds = 0;
    std::uint64_t seed = 0;
    /// assignment[i] = fold of row i.
    std::vector<int> assignment;

    std::vector<Index> test_rows(int fold) const
    {
        std::vector<Index> rows;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == fold) rows.push_back(static_cast<Index>(i));
        }
        return rows;
    }

    std::vector<Index> train_rows(int fold) const
    {
        std::vector<Index> rows;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] != fold) rows.push_back(static_cast<Index>(i));
        }
        return rows;
    }
};

/// Seeded shuffle of the rows, then round-robin fold labels.
inline CvPlan make_folds(Index n, int n_folds, std::uint64_t seed)
{
    if (n_folds < 2 || static_cast<Index>(n_folds) > n) {
        throw BadFoldCount("fold count " + std::to_string(n_folds) + " must lie in [2, "
                           + std::to_string(n) + "]");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    RandomStream rng(seed, {static_cast<std::uint64_t>(StreamPurpose::folds)});
    rng.shuffle(order.begin(), order.end());

    CvPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    plan.assignment.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t k = 0; k < order.size(); ++k) {
        plan.assignment[static_cast<std::size_t>(order[k])] = static_cast<int>(k % static_cast<std::size_t>(n_folds));
    }
    return plan;
}

/// A solver error raised while fitting one fold.
class FoldError : public Error
{
public:
    FoldError(int fold, const Error& cause)
        : Error(cause.kind(), cause.name(), "fold " + std::to_string(fold) + ": " + cause.what()),
          fold_(fold)
    {}

    int fold() const noexcept { return fold_; }

private:
    int fold_;
};

inline Dataset prepare_dataset(const Dataset& raw, const SolverSpec& spec)
{
    return spec.standardize ? standardize(raw, StandardizeOptions{true}) : raw;
}

/// Fits one grid point on an already prepared dataset; returns coefficients.
inline Vector fit_point(const Dataset& prepared, const SolverSpec& spec, const GridPoint& point)
{
    switch (spec.method) {
        case Method::stepwise: {
            StepwiseParams params{point.epsilon, spec.max_steps, spec.rcond};
            return stepwise_fit(prepared, params).final.values();
        }
        case Method::caspar: {
            CasparParams params;
            params.epsilon = point.epsilon;
            params.kernel = KernelSpec{spec.family, point.h, point.alpha};
            params.structure = spec.structure;
            params.max_steps = spec.max_steps;
            params.rcond = spec.rcond;
            return caspar_fit(prepared, params).final.values();
        }
        case Method::lasso: return lasso_fit(prepared, point.lambda, spec.lasso).values();
    }
    throw InvalidArgument("unknown method");
}

inline double mean_squared_error(const Vector& a, const Vector& b)
{
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

/**
 * Held-out predictions for one split. Standardization statistics come from
 * the training rows only.
 */
inline Vector predict_heldout(const Dataset& data, const SolverSpec& spec, const GridPoint& point,
                              const std::vector<Index>& train, const std::vector<Index>& test)
{
    const Dataset prepared = prepare_dataset(data.subset(train), spec);
    const LinearModel model = to_original_scale(prepared, fit_point(prepared, spec, point));
    return model.predict(data.subset(test).X());
}

struct CvScore
{
    std::vector<double> fold_errors;
    double mean = 0.0;
};

inline double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Mean over folds of the held-out mean squared prediction error.
inline CvScore cv_score(const Dataset& data, const SolverSpec& spec, const GridPoint& point,
                        const CvPlan& plan)
{
    if (static_cast<Index>(plan.assignment.size()) != data.n()) {
        throw DimensionMismatch("fold plan does not match the number of rows");
    }
    CvScore out;
    for (int f = 0; f < plan.n_folds; ++f) {
        const auto test = plan.test_rows(f);
        try {
            const Vector pred = predict_heldout(data, spec, point, plan.train_rows(f), test);
            out.fold_errors.push_back(mean_squared_error(pred, data.subset(test).y()));
        } catch (const FoldError&) {
            throw;
        } catch (const Error& e) {
            throw FoldError(f, e);
        }
    }
    out.mean = mean_of(out.fold_errors);
    return out;
}

struct GridEntry
{
    GridPoint point;
    std::vector<double> fold_errors;
    double mean = std::numeric_limits<double>::infinity();
    bool failed = false;
    std::string error;
};

struct GridResult
{
    std::vector<GridEntry> entries;
    std::size_t chosen = 0;

    const GridPoint& chosen_point() const { return entries[chosen].point; }
    double chosen_score() const { return entries[chosen].mean; }
};

namespace detail {

struct PointOutcome
{
    double error = 0.0;
    bool failed = false;
    std::string message;
};

// Greedy points sharing (h, alpha) share one path, computed to the smallest
// epsilon and truncated for the others.
inline std::vector<std::vector<std::size_t>> group_points(const SolverSpec& spec,
                                                          const std::vector<GridPoint>& grid)
{
    std::vector<std::vector<std::size_t>> groups;
    if (spec.method == Method::lasso) {
        std::vector<std::size_t> all(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) all[i] = i;
        groups.push_back(std::move(all));
        return groups;
    }
    std::map<std::pair<double, double>, std::size_t> slot;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto key = spec.method == Method::caspar ? std::make_pair(grid[i].h, grid[i].alpha)
                                                       : std::make_pair(0.0, 0.0);
        auto [it, inserted] = slot.emplace(key, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

inline FitPath greedy_path(const Dataset& prepared, const SolverSpec& spec, const GridPoint& point,
                           double epsilon)
{
    if (spec.method == Method::stepwise) {
        return stepwise_fit(prepared, StepwiseParams{epsilon, spec.max_steps, spec.rcond});
    }
    CasparParams params;
    params.epsilon = epsilon;
    params.kernel = KernelSpec{spec.family, point.h, point.alpha};
    params.structure = spec.structure;
    params.max_steps = spec.max_steps;
    params.rcond = spec.rcond;
    return caspar_fit(prepared, params);
}

/// Held-out error of every point in `members` for one fold.
inline std::vector<PointOutcome> evaluate_group(const Dataset& data, const SolverSpec& spec,
                                                const std::vector<GridPoint>& grid,
                                                const std::vector<std::size_t>& members,
                                                const CvPlan& plan, int fold)
{
    std::vector<PointOutcome> out(members.size());
    const auto test_rows = plan.test_rows(fold);
    const Dataset test = data.subset(test_rows);
    Dataset prepared;
    try {
        prepared = prepare_dataset(data.subset(plan.train_rows(fold)), spec);
    } catch (const Error& e) {
        for (auto& o : out) o = {0.0, true, FoldError(fold, e).what()};
        return out;
    }
    const auto score = [&](const Vector& beta) {
        return mean_squared_error(to_original_scale(prepared, beta).predict(test.X()), test.y());
    };

    if (spec.method == Method::lasso) {
        // Warm starts in decreasing lambda order.
        std::vector<std::size_t> order(members.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return grid[members[a]].lambda > grid[members[b]].lambda;
        });
        const Vector col_sq = prepared.X().colwise().squaredNorm().transpose();
        Vector beta = Vector::Zero(prepared.p());
        for (auto i : order) {
            const double lambda = grid[members[i]].lambda;
            try {
                if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
                beta = lasso_solve(prepared, col_sq, lambda, spec.lasso, beta);
                out[i].error = score(beta);
            } catch (const Error& e) {
                out[i] = {0.0, true, FoldError(fold, e).what()};
            }
        }
        return out;
    }

    double eps_min = std::numeric_limits<double>::infinity();
    for (auto m : members) eps_min = std::min(eps_min, grid[m].epsilon);
    try {
        const FitPath path = greedy_path(prepared, spec, grid[members.front()], eps_min);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const double eps = grid[members[i]].epsilon;
            out[i].error = score(eps == eps_min ? path.final.values() : truncate_path(path, eps).final.values());
        }
    } catch (const Error& e) {
        for (auto& o : out) o = {0.0, true, FoldError(fold, e).what()};
    }
    return out;
}

} // namespace detail

/**
 * Cross-validated grid search.
 *
 * Work units are (fold, point-group) pairs evaluated on up to `threads`
 * workers; results are merged in grid order. The chosen point has the
 * smallest mean CV error, ties going to the earliest grid entry. A point
 * whose fit fails on any fold is marked failed and never chosen.
 */
inline GridResult grid_search(const Dataset& data, const SolverSpec& spec,
                              const std::vector<GridPoint>& grid, const CvPlan& plan,
                              unsigned threads = 1)
{
    if (grid.empty()) throw InvalidArgument("grid search needs at least one point");
    if (static_cast<Index>(plan.assignment.size()) != data.n()) {
        throw DimensionMismatch("fold plan does not match the number of rows");
    }
    if (spec.method == Method::caspar && !spec.structure) {
        throw InvalidArgument("CaSpaR needs a predictor structure");
    }
    const auto groups = detail::group_points(spec, grid);
    const std::size_t n_units = groups.size() * static_cast<std::size_t>(plan.n_folds);
    std::vector<std::vector<detail::PointOutcome>> units(n_units);
    parallel_for(n_units, threads, [&](std::size_t u) {
        const auto g = u / static_cast<std::size_t>(plan.n_folds);
        const auto f = static_cast<int>(u % static_cast<std::size_t>(plan.n_folds));
        units[u] = detail::evaluate_group(data, spec, grid, groups[g], plan, f);
    });

    GridResult result;
    result.entries.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        result.entries[i].point = grid[i];
        result.entries[i].fold_errors.assign(static_cast<std::size_t>(plan.n_folds), 0.0);
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (int f = 0; f < plan.n_folds; ++f) {
            const auto& unit = units[g * static_cast<std::size_t>(plan.n_folds) + static_cast<std::size_t>(f)];
            for (std::size_t i = 0; i < groups[g].size(); ++i) {
                auto& entry = result.entries[groups[g][i]];
                entry.fold_errors[static_cast<std::size_t>(f)] = unit[i].error;
                if (unit[i].failed && !entry.failed) {
                    entry.failed = true;
                    entry.error = unit[i].message;
                }
            }
        }
    }
    bool any = false;
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        auto& e = result.entries[i];
        if (e.failed) {
            e.mean = std::numeric_limits<double>::infinity();
            continue;
        }
        e.mean = mean_of(e.fold_errors);
        if (!any || e.mean < result.entries[result.chosen].mean) {
            result.chosen = i;
            any = true;
        }
    }
    if (!any) {
        throw AllPointsFailed("every grid point failed; first error: " + result.entries.front().error);
    }
    return result;
}

/// max_j |x_j^T y| on the dataset as the solver will see it.
inline double max_abs_correlation(const Dataset& data, const SolverSpec& spec)
{
    const Dataset prepared = prepare_dataset(data, spec);
    return (prepared.X().transpose() * prepared.y()).cwiseAbs().maxCoeff();
}

/// Geometric epsilon grid from max_j |x_j^T y| down to ratio times that, descending.
inline std::vector<double> epsilon_grid(const Dataset& data, const SolverSpec& spec, int count = 20,
                                        double ratio = 0.05)
{
    if (count < 1) throw InvalidArgument("epsilon grid needs at least one point");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("epsilon ratio must lie in (0, 1]");
    const double top = max_abs_correlation(data, spec);
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        out.push_back(top * std::pow(ratio, t));
    }
    return out;
}

inline std::vector<double> default_alpha_grid()
{
    std::vector<double> out;
    for (int i = 0; i <= 10; ++i) out.push_back(static_cast<double>(i) / 10.0);
    return out;
}

inline std::vector<double> default_bandwidth_grid() { return {1.0, 2.0, 3.0, 4.0}; }

/// Grid for greedy methods, ordered bandwidth, then alpha, then epsilon.
inline std::vector<GridPoint> make_greedy_grid(Method method, const std::vector<double>& epsilons,
                                               const std::vector<double>& hs,
                                               const std::vector<double>& alphas)
{
    std::vector<GridPoint> grid;
    if (method == Method::stepwise) {
        for (double e : epsilons) grid.push_back(GridPoint{e});
        return grid;
    }
    for (double h : hs) {
        for (double a : alphas) {
            for (double e : epsilons) grid.push_back(GridPoint{e, h, a});
        }
    }
    return grid;
}

inline std::vector<GridPoint> make_lasso_grid(const Vector& lambdas)
{
    std::vector<GridPoint> grid;
    for (Index i = 0; i < lambdas.size(); ++i) {
        GridPoint pt;
        pt.lambda = lambdas(i);
        grid.push_back(pt);
    }
    return grid;
}

} // namespace caspar
