#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>
#include <Eigen/Eigenvalues>
#include <caspar/errors.hpp>
#include <caspar/linalg.hpp>
#include <caspar/parallel.hpp>
#include <caspar/rng.hpp>
#include <caspar/solvers.hpp>
#include <caspar/structure.hpp>
#include <caspar/tuning.hpp>

namespace caspar {

struct SimConfig
{
    Index n = 100;
    Index p = 250;
    Index n_groups = 7;
    Index group_size = 5;
    double peak = 6.0;
    double flank = 3.0;
    double noise_sd = 1.0;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (n < 1 || p < 1) throw InvalidArgument("simulation needs n >= 1 and p >= 1");
        if (n_groups < 1 || group_size < 1) throw InvalidArgument("need at least one group of size >= 1");
        if (!(noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be non-negative");
        if (n_groups * group_size > p) {
            throw InfeasiblePlacement(std::to_string(n_groups) + " groups of " + std::to_string(group_size)
                                      + " do not fit in " + std::to_string(p) + " predictors");
        }
    }
};

struct SimInstance
{
    /// Raw draws; fitting code standardizes on its own.
    Dataset dataset;
    CoefficientVector beta_true;
    std::vector<Index> group_starts;
    std::uint64_t seed = 0;
};

/**
 * Draws X ~ N(0,1) i.i.d., places n_groups disjoint contiguous runs uniformly
 * over all valid placements, sets one uniformly chosen peak per run and
 * flank values elsewhere in the run, randomizes signs, and forms
 * y = X beta + noise_sd * N(0,1).
 */
inline SimInstance simulate_instance(const SimConfig& config)
{
    config.validate();
    const Index n = config.n;
    const Index p = config.p;
    const Index g = config.n_groups;
    const Index len = config.group_size;
    const auto key = [&](StreamPurpose purpose) { return static_cast<std::uint64_t>(purpose); };

    // Placements of g runs of length len in p slots correspond one-to-one to
    // g-subsets of {0, ..., p - g*len + g - 1}: start_i = c_i + i*(len - 1).
    RandomStream placement(config.seed, {key(StreamPurpose::placement)});
    const Index slots = p - g * len + g;
    std::vector<Index> pool(static_cast<std::size_t>(slots));
    for (Index i = 0; i < slots; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < g; ++i) {
        const auto j = i + static_cast<Index>(placement.uniform_index(static_cast<std::uint64_t>(slots - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::vector<Index> chosen(pool.begin(), pool.begin() + g);
    std::sort(chosen.begin(), chosen.end());
    std::vector<Index> starts(static_cast<std::size_t>(g));
    for (Index i = 0; i < g; ++i) starts[static_cast<std::size_t>(i)] = chosen[static_cast<std::size_t>(i)] + i * (len - 1);

    Vector beta = Vector::Zero(p);
    RandomStream signs(config.seed, {key(StreamPurpose::signs)});
    for (Index i = 0; i < g; ++i) {
        const Index peak_at = static_cast<Index>(placement.uniform_index(static_cast<std::uint64_t>(len)));
        for (Index k = 0; k < len; ++k) {
            const double mag = k == peak_at ? config.peak : config.flank;
            beta(starts[static_cast<std::size_t>(i)] + k) = signs.coin() ? -mag : mag;
        }
    }

    Matrix X(n, p);
    RandomStream design(config.seed, {key(StreamPurpose::design)});
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) X(i, j) = design.normal();
    }
    RandomStream noise(config.seed, {key(StreamPurpose::noise)});
    Vector y = X * beta;
    for (Index i = 0; i < n; ++i) y(i) += config.noise_sd * noise.normal();

    SimInstance out;
    out.dataset = Dataset(std::move(X), std::move(y));
    out.beta_true = CoefficientVector(std::move(beta));
    out.group_starts = std::move(starts);
    out.seed = config.seed;
    return out;
}

/// ||beta_hat - beta_true||^2 / ||beta_true||^2
inline double recovery_error(const Vector& beta_hat, const Vector& beta_true)
{
    if (beta_hat.size() != beta_true.size()) throw DimensionMismatch("coefficient lengths differ");
    const double denom = beta_true.squaredNorm();
    if (!(denom > 0.0)) throw ZeroTruth("true coefficient vector is zero");
    return (beta_hat - beta_true).squaredNorm() / denom;
}

struct SelectionRates
{
    double tpr = 0.0;
    /// False selections divided by |supp(beta_true)|.
    double fpr = 0.0;
};

inline SelectionRates selection_rates(const Vector& beta_hat, const Vector& beta_true)
{
    if (beta_hat.size() != beta_true.size()) throw DimensionMismatch("coefficient lengths differ");
    Index truth = 0, hits = 0, false_hits = 0;
    for (Index j = 0; j < beta_true.size(); ++j) {
        const bool t = beta_true(j) != 0.0;
        const bool s = beta_hat(j) != 0.0;
        truth += t;
        hits += t && s;
        false_hits += s && !t;
    }
    if (truth == 0) throw ZeroTruth("true support is empty");
    return {static_cast<double>(hits) / static_cast<double>(truth),
            static_cast<double>(false_hits) / static_cast<double>(truth)};
}

/// Smallest eigenvalue of (1/n) X_F^T X_F, clamped at 0.
inline double restricted_eigenvalue(const Dataset& data, const IndexSet& support)
{
    check_support(data, support);
    if (support.empty()) throw InvalidArgument("support must be non-empty");
    const Matrix XF = gather_columns(data.X(), support);
    const Matrix gram = (XF.transpose() * XF) / static_cast<double>(data.n());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    return std::max(0.0, eig.eigenvalues().minCoeff());
}

struct TheoryDiagnostics
{
    /// max_{j not in F} ||(X_F^T X_F)^{-1} X_F^T x_j||_1
    double mu = 0.0;
    /// smallest eigenvalue of (1/n) X_F^T X_F
    double rho = 0.0;
};

inline TheoryDiagnostics theory_diagnostics(const Dataset& data, const IndexSet& support,
                                            double rcond = default_rcond)
{
    check_support(data, support);
    if (support.empty()) throw InvalidArgument("support must be non-empty");
    const Matrix XF = gather_columns(data.X(), support);
    Eigen::ColPivHouseholderQR<Matrix> qr(XF);
    const auto k = static_cast<Index>(support.size());
    if (k > data.n()) throw SingularSupport("support larger than the number of rows");
    const auto diag = qr.matrixR().diagonal().head(k).cwiseAbs();
    const double ratio = diag.minCoeff() / diag.maxCoeff();
    if (!(ratio * ratio >= rcond)) throw SingularSupport("restricted Gram matrix is numerically singular");

    std::vector<char> in_support(static_cast<std::size_t>(data.p()), 0);
    for (auto j : support) in_support[static_cast<std::size_t>(j)] = 1;

    TheoryDiagnostics out;
    for (Index j = 0; j < data.p(); ++j) {
        if (in_support[static_cast<std::size_t>(j)]) continue;
        const Vector coef = qr.solve(Vector(data.X().col(j)));
        out.mu = std::max(out.mu, coef.lpNorm<1>());
    }
    out.rho = restricted_eigenvalue(data, support);
    return out;
}

// ---------------------------------------------------------------------------
// Experiment harness

struct ExperimentConfig
{
    std::vector<Index> ns{50, 75, 100, 125, 150};
    int replicates = 1;
    std::vector<Method> methods{Method::stepwise, Method::caspar, Method::lasso};
    SimConfig base;
    std::uint64_t seed = 1;
    int n_folds = 10;
    KernelFamily family = KernelFamily::boxcar;
    std::vector<double> bandwidths = default_bandwidth_grid();
    std::vector<double> alphas = default_alpha_grid();
    int epsilon_count = 20;
    double epsilon_ratio = 0.05;
    int lambda_count = 100;
    double lambda_ratio = 0.01;
    bool standardize = true;
    unsigned threads = 1;
};

struct ExperimentRow
{
    Index n = 0;
    int replicate = 0;
    Method method = Method::stepwise;
    double recovery_error = std::numeric_limits<double>::quiet_NaN();
    double tpr = std::numeric_limits<double>::quiet_NaN();
    double fpr = std::numeric_limits<double>::quiet_NaN();
    Index n_selected = -1;
    /// Tuned epsilon for greedy methods; tuned lambda for lasso.
    double eps = std::numeric_limits<double>::quiet_NaN();
    double h = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
};

/// Seed of the instance for (n, replicate) under a root seed.
inline std::uint64_t instance_seed(std::uint64_t root, Index n, int replicate)
{
    return splitmix64(splitmix64(root ^ 0x5ee5ULL) ^ splitmix64(static_cast<std::uint64_t>(n) * 1000003ULL
                                                               + static_cast<std::uint64_t>(replicate)));
}

struct TunedFit
{
    GridPoint point;
    Vector beta;          // original scale
    double cv_error = 0.0;
};

/// Tunes `spec` by CV on `data`, refits on all rows, returns original-scale coefficients.
inline TunedFit tune_and_fit(const Dataset& data, const SolverSpec& spec, const ExperimentConfig& cfg,
                             const CvPlan& plan, unsigned threads = 1)
{
    std::vector<GridPoint> grid;
    if (spec.method == Method::lasso) {
        grid = make_lasso_grid(lambda_path(prepare_dataset(data, spec), cfg.lambda_count, cfg.lambda_ratio));
    } else {
        grid = make_greedy_grid(spec.method, epsilon_grid(data, spec, cfg.epsilon_count, cfg.epsilon_ratio),
                                cfg.bandwidths, cfg.alphas);
    }
    const GridResult result = grid_search(data, spec, grid, plan, threads);
    TunedFit out;
    out.point = result.chosen_point();
    out.cv_error = result.chosen_score();
    const Dataset prepared = prepare_dataset(data, spec);
    out.beta = to_original_scale(prepared, fit_point(prepared, spec, out.point)).beta;
    return out;
}

/**
 * Runs every (n, replicate, method) cell. Each (n, replicate) instance is an
 * independent job; all methods on an instance share one fold plan. A failed
 * cell is reported in its row and the run continues.
 */
inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg)
{
    if (cfg.replicates < 1) throw InvalidArgument("replicates must be >= 1");
    if (cfg.ns.empty() || cfg.methods.empty()) throw InvalidArgument("need at least one n and one method");
    struct Job
    {
        Index n;
        int replicate;
    };
    std::vector<Job> jobs;
    for (auto n : cfg.ns) {
        for (int r = 0; r < cfg.replicates; ++r) jobs.push_back({n, r});
    }
    const auto structure = std::make_shared<const PredictorStructure>(PredictorStructure::sequential(cfg.base.p));
    std::vector<std::vector<ExperimentRow>> rows(jobs.size());

    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        const Job job = jobs[i];
        SimConfig sc = cfg.base;
        sc.n = job.n;
        sc.seed = instance_seed(cfg.seed, job.n, job.replicate);
        auto& out = rows[i];
        SimInstance inst;
        std::string setup_error;
        CvPlan plan;
        try {
            inst = simulate_instance(sc);
            plan = make_folds(job.n, cfg.n_folds, sc.seed);
        } catch (const Error& e) {
            setup_error = e.what();
        }
        for (auto method : cfg.methods) {
            ExperimentRow row;
            row.n = job.n;
            row.replicate = job.replicate;
            row.method = method;
            row.seed = sc.seed;
            if (!setup_error.empty()) {
                row.failed = true;
                row.error = setup_error;
                out.push_back(row);
                continue;
            }
            try {
                SolverSpec spec;
                spec.method = method;
                spec.family = cfg.family;
                spec.structure = structure;
                spec.standardize = cfg.standardize;
                const TunedFit fit = tune_and_fit(inst.dataset, spec, cfg, plan);
                const Vector& truth = inst.beta_true.values();
                row.recovery_error = recovery_error(fit.beta, truth);
                const auto rates = selection_rates(fit.beta, truth);
                row.tpr = rates.tpr;
                row.fpr = rates.fpr;
                row.n_selected = static_cast<Index>((fit.beta.array() != 0.0).count());
                row.eps = method == Method::lasso ? fit.point.lambda : fit.point.epsilon;
                row.h = fit.point.h;
                row.alpha = fit.point.alpha;
            } catch (const Error& e) {
                row.failed = true;
                row.error = e.what();
            }
            out.push_back(row);
        }
    });

    std::vector<ExperimentRow> flat;
    for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return flat;
}

inline const char* experiment_header() { return "n,replicate,method,recovery_error,tpr,fpr,n_selected,eps,h,alpha,seed"; }

inline std::string format_number(double v)
{
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Comma-separated table; failed cells carry NA in every metric column.
inline void write_results_table(std::ostream& os, const std::vector<ExperimentRow>& rows)
{
    os << experiment_header() << '\n';
    for (const auto& r : rows) {
        os << r.n << ',' << r.replicate << ',' << to_string(r.method) << ',' << format_number(r.recovery_error)
           << ',' << format_number(r.tpr) << ',' << format_number(r.fpr) << ','
           << (r.failed ? std::string("NA") : std::to_string(r.n_selected)) << ',' << format_number(r.eps) << ','
           << format_number(r.h) << ',' << format_number(r.alpha) << ',' << r.seed << '\n';
    }
}

struct MethodSummary
{
    double mean_recovery_error = 0.0;
    double mean_tpr = 0.0;
    double mean_fpr = 0.0;
    int count = 0;
};

/// Means over successful replicates for one (n, method) cell.
inline MethodSummary summarize(const std::vector<ExperimentRow>& rows, Index n, Method method)
{
    MethodSummary s;
    for (const auto& r : rows) {
        if (r.n != n || r.method != method || r.failed) continue;
        s.mean_recovery_error += r.recovery_error;
        s.mean_tpr += r.tpr;
        s.mean_fpr += r.fpr;
        ++s.count;
    }
    if (s.count > 0) {
        s.mean_recovery_error /= s.count;
        s.mean_tpr /= s.count;
        s.mean_fpr /= s.count;
    }
    return s;
}

} // namespace caspar
