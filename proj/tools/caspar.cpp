// caspar: command-line front end for clustered and sparse regression.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <caspar.hpp>

namespace fs = std::filesystem;
using caspar::io::json;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_numerical = 3;

int exit_code(caspar::ErrorKind kind)
{
    switch (kind) {
        case caspar::ErrorKind::usage: return exit_usage;
        case caspar::ErrorKind::data: return exit_data;
        case caspar::ErrorKind::numerical: return exit_numerical;
    }
    return exit_data;
}

const char* kind_name(caspar::ErrorKind kind)
{
    switch (kind) {
        case caspar::ErrorKind::usage: return "usage";
        case caspar::ErrorKind::data: return "data";
        case caspar::ErrorKind::numerical: return "numerical";
    }
    return "data";
}

int report(const std::string& name, caspar::ErrorKind kind, const std::string& message)
{
    std::cerr << json{{"error", name}, {"kind", kind_name(kind)}, {"message", message}}.dump() << '\n';
    return exit_code(kind);
}

/// "<dir>/<stem>.config.json" next to an output file.
std::string config_path_for(const std::string& output)
{
    fs::path p(output);
    return (p.parent_path() / (p.stem().string() + ".config.json")).string();
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw caspar::IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::vector<std::string> default_names(caspar::Index p)
{
    std::vector<std::string> names;
    for (caspar::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

struct StructureOptions
{
    std::string sidecar;
    std::string graph;
    std::string node_map;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--structure", sidecar, "Design sidecar JSON with column positions");
        cmd->add_option("--graph", graph, "Edge list 'u v weight' for graph distances");
        cmd->add_option("--node-map", node_map, "Predictor-to-node map 'index node'");
    }

    std::shared_ptr<const caspar::PredictorStructure> load(caspar::Index p) const
    {
        if (!graph.empty()) {
            if (node_map.empty()) throw caspar::InvalidArgument("--graph needs --node-map");
            return std::make_shared<const caspar::PredictorStructure>(caspar::io::read_graph(graph, node_map, p));
        }
        if (!sidecar.empty()) {
            auto s = caspar::io::read_positions(sidecar);
            if (s.size() != p) {
                throw caspar::DimensionMismatch("structure sidecar describes " + std::to_string(s.size())
                                                + " columns but the design has " + std::to_string(p));
            }
            return std::make_shared<const caspar::PredictorStructure>(std::move(s));
        }
        return std::make_shared<const caspar::PredictorStructure>(caspar::PredictorStructure::sequential(p));
    }

    json describe() const
    {
        if (!graph.empty()) return json{{"type", "graph"}, {"edges", graph}, {"node_map", node_map}};
        if (!sidecar.empty()) return json{{"type", "positional"}, {"sidecar", sidecar}};
        return json{{"type", "sequential"}};
    }
};

// ---------------------------------------------------------------------------

struct SimulateCmd
{
    caspar::SimConfig config;
    std::string out_dir;

    void add(CLI::App& app)
    {
        auto* cmd = app.add_subcommand("simulate", "Draw one structured-sparsity regression instance");
        cmd->add_option("--n", config.n, "Rows")->capture_default_str();
        cmd->add_option("--p", config.p, "Predictors")->capture_default_str();
        cmd->add_option("--groups", config.n_groups, "Number of nonzero groups")->capture_default_str();
        cmd->add_option("--group-size", config.group_size, "Group length")->capture_default_str();
        cmd->add_option("--peak", config.peak, "Peak coefficient magnitude")->capture_default_str();
        cmd->add_option("--flank", config.flank, "Other in-group magnitude")->capture_default_str();
        cmd->add_option("--noise-sd", config.noise_sd, "Noise standard deviation")->capture_default_str();
        cmd->add_option("--seed", config.seed, "Random seed")->capture_default_str();
        cmd->add_option("--out-dir", out_dir, "Output directory")->required();
        cmd->callback([this] { run(); });
    }

    void run() const
    {
        const auto inst = caspar::simulate_instance(config);
        ensure_dir(out_dir);
        const auto p = inst.dataset.p();
        const auto names = default_names(p);
        std::vector<long long> positions;
        for (caspar::Index j = 0; j < p; ++j) positions.push_back(j);

        caspar::io::write_design(out_dir + "/design.csv", inst.dataset, names);
        caspar::io::write_json(out_dir + "/design.json", caspar::io::design_sidecar(names, positions));
        {
            auto out = caspar::text::open_output(out_dir + "/truth.csv");
            out << "index,beta\n";
            for (caspar::Index j = 0; j < p; ++j) out << j << ',' << caspar::io::number(inst.beta_true[j]) << '\n';
        }
        caspar::io::write_json(out_dir + "/config.json",
                               json{{"subcommand", "simulate"},
                                    {"n", config.n},
                                    {"p", config.p},
                                    {"groups", config.n_groups},
                                    {"group_size", config.group_size},
                                    {"peak", config.peak},
                                    {"flank", config.flank},
                                    {"noise_sd", config.noise_sd},
                                    {"seed", config.seed},
                                    {"rng", "mt19937_64/v" + std::to_string(caspar::RandomStream::version)},
                                    {"group_starts", inst.group_starts}});
    }
};

struct EncodeCmd
{
    std::string sequences, phenotypes, drug, transform = "log10", out_dir;

    void add(CLI::App& app)
    {
        auto* cmd = app.add_subcommand("encode", "Encode aligned sequences into a mutation-indicator design");
        cmd->add_option("--sequences", sequences, "CSV 'id,sequence'")->required();
        cmd->add_option("--phenotypes", phenotypes, "CSV 'id,drug,value'")->required();
        cmd->add_option("--drug", drug, "Drug to select from the phenotype file")->required();
        cmd->add_option("--transform", transform, "Phenotype transform: log10 | none")->capture_default_str();
        cmd->add_option("--out-dir", out_dir, "Output directory")->required();
        cmd->callback([this] { run(); });
    }

    void run() const
    {
        const auto tf = caspar::parse_transform(transform);
        const auto loaded = caspar::load_panel(sequences, phenotypes, drug);
        const auto enc = caspar::encode_panel(loaded.panel, loaded.phenotype, tf);
        ensure_dir(out_dir);
        std::vector<std::string> names;
        std::vector<long long> positions;
        for (const auto& c : enc.columns) {
            names.push_back(c.name());
            positions.push_back(c.position);
        }
        caspar::io::write_design(out_dir + "/design.csv", enc.dataset, names);
        auto sidecar = caspar::io::design_sidecar(names, positions, &enc.columns);
        sidecar["row_ids"] = enc.row_ids;
        sidecar["dropped_rows"] = loaded.dropped_rows + enc.dropped_rows;
        caspar::io::write_json(out_dir + "/design.json", sidecar);
        caspar::io::write_json(out_dir + "/config.json",
                               json{{"subcommand", "encode"},
                                    {"sequences", sequences},
                                    {"phenotypes", phenotypes},
                                    {"drug", drug},
                                    {"transform", transform}});
        std::cerr << "encoded " << enc.dataset.n() << " sequences into " << enc.dataset.p()
                  << " mutation predictors; dropped " << loaded.dropped_rows + enc.dropped_rows
                  << " rows without a phenotype\n";
    }
};

struct FitCmd
{
    std::string design, method = "caspar", kernel = "boxcar", out;
    StructureOptions structure;
    double epsilon = 0.0, h = 2.0, alpha = 0.5, lambda = 1.0;
    caspar::Index max_steps = 0;
    bool no_standardize = false;
    double lasso_tol = 1e-10;
    int lasso_max_iters = 100000;

    void add(CLI::App& app)
    {
        auto* cmd = app.add_subcommand("fit", "Fit one model with fixed parameters");
        cmd->add_option("--design", design, "Design CSV")->required();
        cmd->add_option("--method", method, "stepwise | caspar | lasso")->capture_default_str();
        cmd->add_option("--epsilon", epsilon, "Greedy stopping threshold")->capture_default_str();
        cmd->add_option("--kernel", kernel, "boxcar | epanechnikov | gaussian")->capture_default_str();
        cmd->add_option("--bandwidth", h, "Kernel bandwidth")->capture_default_str();
        cmd->add_option("--alpha", alpha, "Stetson mixing weight")->capture_default_str();
        cmd->add_option("--lambda", lambda, "Lasso penalty")->capture_default_str();
        cmd->add_option("--max-steps", max_steps, "Greedy step cap (0 = min(n-1, p))")->capture_default_str();
        cmd->add_option("--lasso-tol", lasso_tol, "Lasso convergence tolerance")->capture_default_str();
        cmd->add_option("--lasso-max-iters", lasso_max_iters, "Lasso sweep cap")->capture_default_str();
        cmd->add_flag("--no-standardize", no_standardize, "Fit on the raw columns");
        cmd->add_option("--out", out, "Output JSON")->required();
        structure.add(cmd);
        cmd->callback([this] { run(); });
    }

    void run() const
    {
        const auto m = caspar::parse_method(method);
        const auto d = caspar::io::read_design(design);
        const caspar::Dataset prepared = no_standardize ? d.dataset : caspar::standardize(d.dataset);

        json params{{"method", method}, {"standardize", !no_standardize}, {"max_steps", max_steps}};
        json doc{{"method", method}, {"n", d.dataset.n()}, {"p", d.dataset.p()}};
        if (m == caspar::Method::lasso) {
            params["lambda"] = lambda;
            params["lasso_tol"] = lasso_tol;
            params["lasso_max_iters"] = lasso_max_iters;
            const auto beta = caspar::lasso_fit(prepared, lambda, lasso_tol, lasso_max_iters);
            std::vector<std::string> sel_names;
            for (auto j : beta.support()) sel_names.push_back(d.column_names[static_cast<std::size_t>(j)]);
            doc["selected"] = beta.support();
            doc["selected_names"] = sel_names;
            doc["stop_reason"] = "converged";
            doc["coefficients"] = caspar::io::coefficients_json(prepared, beta.values());
        } else {
            params["epsilon"] = epsilon;
            caspar::FitPath path;
            if (m == caspar::Method::stepwise) {
                path = caspar::stepwise_fit(prepared, caspar::StepwiseParams{epsilon, max_steps});
            } else {
                caspar::CasparParams cp;
                cp.epsilon = epsilon;
                cp.kernel = caspar::KernelSpec{caspar::parse_kernel_family(kernel), h, alpha};
                cp.structure = structure.load(d.dataset.p());
                cp.max_steps = max_steps;
                params["kernel"] = kernel;
                params["h"] = h;
                params["alpha"] = alpha;
                params["structure"] = structure.describe();
                path = caspar::caspar_fit(prepared, cp);
            }
            doc.update(caspar::io::path_json(path, prepared, d.column_names));
        }
        doc["params"] = params;
        caspar::io::write_json(out, doc);
        json config = params;
        config["subcommand"] = "fit";
        config["design"] = design;
        config["out"] = out;
        caspar::io::write_json(config_path_for(out), config);
    }
};

struct GridOptions
{
    std::string kernel = "boxcar";
    std::vector<double> hs = caspar::default_bandwidth_grid();
    std::vector<double> alphas = caspar::default_alpha_grid();
    std::vector<double> epsilons;
    int eps_count = 20;
    double eps_ratio = 0.05;
    int lambda_count = 100;
    double lambda_ratio = 0.01;
    int folds = 10;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--kernel", kernel, "boxcar | epanechnikov | gaussian")->capture_default_str();
        cmd->add_option("--hs", hs, "Bandwidth grid")->delimiter(',')->capture_default_str();
        cmd->add_option("--alphas", alphas, "Alpha grid")->delimiter(',')->capture_default_str();
        cmd->add_option("--epsilons", epsilons, "Explicit epsilon grid (overrides --eps-count)")->delimiter(',');
        cmd->add_option("--eps-count", eps_count, "Points in the data-driven epsilon grid")->capture_default_str();
        cmd->add_option("--eps-ratio", eps_ratio, "Smallest/largest epsilon")->capture_default_str();
        cmd->add_option("--lambda-count", lambda_count, "Points in the lasso lambda grid")->capture_default_str();
        cmd->add_option("--lambda-ratio", lambda_ratio, "Smallest/largest lambda")->capture_default_str();
        cmd->add_option("--folds", folds, "Cross-validation folds")->capture_default_str();
    }

    json describe() const
    {
        return json{{"kernel", kernel},         {"hs", hs},
                    {"alphas", alphas},         {"epsilons", epsilons},
                    {"eps_count", eps_count},   {"eps_ratio", eps_ratio},
                    {"lambda_count", lambda_count}, {"lambda_ratio", lambda_ratio},
                    {"folds", folds}};
    }
};

struct CvCmd
{
    std::string design, method = "caspar", out;
    StructureOptions structure;
    GridOptions grid;
    std::uint64_t seed = 1;
    bool no_standardize = false;
    unsigned threads = caspar::default_thread_count();

    void add(CLI::App& app)
    {
        auto* cmd = app.add_subcommand("cv", "Cross-validated grid search");
        cmd->add_option("--design", design, "Design CSV")->required();
        cmd->add_option("--method", method, "stepwise | caspar | lasso")->capture_default_str();
        cmd->add_option("--seed", seed, "Fold assignment seed")->capture_default_str();
        cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();
        cmd->add_flag("--no-standardize", no_standardize, "Fit on the raw columns");
        cmd->add_option("--out", out, "Output grid table (CSV)")->required();
        structure.add(cmd);
        grid.add(cmd);
        cmd->callback([this] { run(); });
    }

    void run() const
    {
        const auto d = caspar::io::read_design(design);
        caspar::SolverSpec spec;
        spec.method = caspar::parse_method(method);
        spec.family = caspar::parse_kernel_family(grid.kernel);
        spec.standardize = !no_standardize;
        if (spec.method == caspar::Method::caspar) spec.structure = structure.load(d.dataset.p());

        std::vector<caspar::GridPoint> points;
        if (spec.method == caspar::Method::lasso) {
            points = caspar::make_lasso_grid(caspar::lambda_path(caspar::prepare_dataset(d.dataset, spec),
                                                                 grid.lambda_count, grid.lambda_ratio));
        } else {
            const auto eps = grid.epsilons.empty()
                ? caspar::epsilon_grid(d.dataset, spec, grid.eps_count, grid.eps_ratio)
                : grid.epsilons;
            points = caspar::make_greedy_grid(spec.method, eps, grid.hs, grid.alphas);
        }
        const auto plan = caspar::make_folds(d.dataset.n(), grid.folds, seed);
        const auto result = caspar::grid_search(d.dataset, spec, points, plan, threads);
        {
            auto os = caspar::text::open_output(out);
            caspar::io::write_grid_table(os, result);
        }
        json config{{"subcommand", "cv"},   {"design", design},       {"method", method},
                    {"seed", seed},         {"standardize", !no_standardize},
                    {"grid", grid.describe()}, {"fold_assignment", plan.assignment},
                    {"out", out}};
        if (spec.method == caspar::Method::caspar) config["structure"] = structure.describe();
        caspar::io::write_json(config_path_for(out), config);
        std::cout << json{{"chosen", caspar::io::grid_point_json(result.chosen_point())},
                          {"cv_error", result.chosen_score()}}
                         .dump()
                  << '\n';
    }
};

struct DiagnoseCmd
{
    std::string design, truth, out;
    std::vector<caspar::Index> support;
    bool no_standardize = false;

    void add(CLI::App& app)
    {
        auto* cmd = app.add_subcommand("diagnose", "Incoherence and restricted eigenvalue of a support");
        cmd->add_option("--design", design, "Design CSV")->required();
        auto* s = cmd->add_option("--support", support, "Support indices")->delimiter(',');
        auto* t = cmd->add_option("--truth", truth, "truth.csv from simulate; support = nonzeros");
        s->excludes(t);
        cmd->add_flag("--no-standardize", no_standardize, "Use the raw columns");
        cmd->add_option("--out", out, "Output JSON (stdout if omitted)");
        cmd->callback([this] { run(); });
    }

    void run() const
    {
        const auto d = caspar::io::read_design(design);
        caspar::IndexSet F = support;
        if (!truth.empty()) {
            F.clear();
            for (const auto& [no, line] : caspar::text::read_lines(truth)) {
                const auto f = caspar::text::split(line, ',');
                if (f.size() != 2) throw caspar::ParseError(truth, no, "expected 'index,beta'");
                if (f[0] == "index") continue;
                if (caspar::text::parse_double(f[1], truth, no) != 0.0) F.push_back(caspar::text::parse_int(f[0], truth, no));
            }
        }
        if (F.empty()) throw caspar::InvalidArgument("diagnose needs --support or --truth");
        const caspar::Dataset data = no_standardize ? d.dataset : caspar::standardize(d.dataset);
        const auto diag = caspar::theory_diagnostics(data, F);
        const json doc{{"support", F}, {"mu", diag.mu}, {"rho", diag.rho}, {"standardize", !no_standardize}};
        if (out.empty()) {
            std::cout << doc.dump(2) << '\n';
        } else {
            caspar::io::write_json(out, doc);
            caspar::io::write_json(config_path_for(out),
                                   json{{"subcommand", "diagnose"}, {"design", design}, {"truth", truth},
                                        {"support", F}, {"standardize", !no_standardize}, {"out", out}});
        }
    }
};

struct ExperimentCmd
{
    caspar::ExperimentConfig cfg;
    GridOptions grid;
    std::vector<std::string> methods{"stepwise", "caspar", "lasso"};
    bool no_standardize = false;
    std::string out;

    void add(CLI::App& app)
    {
        auto* cmd = app.add_subcommand("experiment", "Simulation study over n, replicates and methods");
        cfg.threads = caspar::default_thread_count();
        cmd->add_option("--ns", cfg.ns, "Sample sizes")->delimiter(',')->capture_default_str();
        cmd->add_option("--replicates", cfg.replicates, "Replicates per n")->capture_default_str();
        cmd->add_option("--methods", methods, "Methods")->delimiter(',')->capture_default_str();
        cmd->add_option("--seed", cfg.seed, "Root seed")->capture_default_str();
        cmd->add_option("--p", cfg.base.p, "Predictors")->capture_default_str();
        cmd->add_option("--groups", cfg.base.n_groups, "Nonzero groups")->capture_default_str();
        cmd->add_option("--group-size", cfg.base.group_size, "Group length")->capture_default_str();
        cmd->add_option("--peak", cfg.base.peak, "Peak magnitude")->capture_default_str();
        cmd->add_option("--flank", cfg.base.flank, "Flank magnitude")->capture_default_str();
        cmd->add_option("--noise-sd", cfg.base.noise_sd, "Noise standard deviation")->capture_default_str();
        cmd->add_option("--threads", cfg.threads, "Worker threads")->capture_default_str();
        cmd->add_flag("--no-standardize", no_standardize, "Fit on the raw columns");
        cmd->add_option("--out", out, "Results table (CSV)")->required();
        grid.add(cmd);
        cmd->callback([this] { run(); });
    }

    void run()
    {
        cfg.methods.clear();
        for (const auto& m : methods) cfg.methods.push_back(caspar::parse_method(m));
        cfg.family = caspar::parse_kernel_family(grid.kernel);
        cfg.bandwidths = grid.hs;
        cfg.alphas = grid.alphas;
        cfg.epsilon_count = grid.eps_count;
        cfg.epsilon_ratio = grid.eps_ratio;
        cfg.lambda_count = grid.lambda_count;
        cfg.lambda_ratio = grid.lambda_ratio;
        cfg.n_folds = grid.folds;
        cfg.standardize = !no_standardize;
        if (!grid.epsilons.empty()) throw caspar::InvalidArgument("experiment uses data-driven epsilon grids");

        const auto rows = caspar::run_experiment(cfg);
        {
            auto os = caspar::text::open_output(out);
            caspar::write_results_table(os, rows);
        }
        for (const auto& r : rows) {
            if (r.failed) {
                std::cerr << "row n=" << r.n << " replicate=" << r.replicate << " method="
                          << caspar::to_string(r.method) << " failed: " << r.error << '\n';
            }
        }
        // Thread count is left out: output is independent of it.
        caspar::io::write_json(config_path_for(out),
                               json{{"subcommand", "experiment"},
                                    {"ns", cfg.ns},
                                    {"replicates", cfg.replicates},
                                    {"methods", methods},
                                    {"seed", cfg.seed},
                                    {"p", cfg.base.p},
                                    {"groups", cfg.base.n_groups},
                                    {"group_size", cfg.base.group_size},
                                    {"peak", cfg.base.peak},
                                    {"flank", cfg.base.flank},
                                    {"noise_sd", cfg.base.noise_sd},
                                    {"standardize", cfg.standardize},
                                    {"grid", grid.describe()},
                                    {"out", out}});
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Clustered and sparse regression: kernel-weighted forward stepwise selection"};
    app.require_subcommand(1);
    SimulateCmd simulate;
    EncodeCmd encode;
    FitCmd fit;
    CvCmd cv;
    DiagnoseCmd diagnose;
    ExperimentCmd experiment;
    simulate.add(app);
    encode.add(app);
    fit.add(app);
    cv.add(app);
    diagnose.add(app);
    experiment.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    } catch (const caspar::Error& e) {
        return report(e.name(), e.kind(), e.what());
    } catch (const std::exception& e) {
        return report("InternalError", caspar::ErrorKind::numerical, e.what());
    }
    return 0;
}
