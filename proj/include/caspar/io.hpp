#pragma once
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>
#include <json.hpp>
#include <caspar/errors.hpp>
#include <caspar/ingest.hpp>
#include <caspar/linalg.hpp>
#include <caspar/solvers.hpp>
#include <caspar/structure.hpp>
#include <caspar/text.hpp>
#include <caspar/tuning.hpp>

namespace caspar::io {

using json = nlohmann::json;

inline constexpr const char* design_format = "caspar-design/1";

/// Shortest decimal form that round-trips a double.
inline std::string number(double v)
{
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct Design
{
    Dataset dataset;
    std::vector<std::string> column_names;
};

/// Design table: header `y,<name_1>,...,<name_p>`, one row per observation.
inline void write_design(std::ostream& os, const Dataset& data, const std::vector<std::string>& names)
{
    if (static_cast<Index>(names.size()) != data.p()) throw DimensionMismatch("need one name per column");
    os << "y";
    for (const auto& nm : names) os << ',' << nm;
    os << '\n';
    for (Index i = 0; i < data.n(); ++i) {
        os << number(data.y()(i));
        for (Index j = 0; j < data.p(); ++j) os << ',' << number(data.X()(i, j));
        os << '\n';
    }
}

inline void write_design(const std::string& path, const Dataset& data, const std::vector<std::string>& names)
{
    auto out = text::open_output(path);
    write_design(out, data, names);
}

inline Design read_design(const std::string& path)
{
    const auto lines = text::read_lines(path);
    if (lines.empty()) throw ParseError(path, 1, "empty design file");
    const auto header = text::split(lines.front().second, ',');
    if (header.size() < 2 || header.front() != "y") {
        throw ParseError(path, lines.front().first, "header must start with 'y' and name at least one predictor");
    }
    const auto p = static_cast<Index>(header.size() - 1);
    const auto n = static_cast<Index>(lines.size() - 1);
    if (n < 1) throw ParseError(path, lines.front().first, "design has no rows");
    Matrix X(n, p);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        const auto& [no, line] = lines[static_cast<std::size_t>(i + 1)];
        const auto f = text::split(line, ',');
        if (static_cast<Index>(f.size()) != p + 1) {
            throw ParseError(path, no, "expected " + std::to_string(p + 1) + " fields, got " + std::to_string(f.size()));
        }
        y(i) = text::parse_double(f[0], path, no);
        for (Index j = 0; j < p; ++j) X(i, j) = text::parse_double(f[static_cast<std::size_t>(j + 1)], path, no);
    }
    Design d;
    d.column_names.assign(header.begin() + 1, header.end());
    d.dataset = Dataset(std::move(X), std::move(y));
    return d;
}

/// Sidecar describing columns and their positions.
inline json design_sidecar(const std::vector<std::string>& names, const std::vector<long long>& positions,
                           const std::vector<MutationColumn>* mutations = nullptr)
{
    json cols = json::array();
    for (std::size_t j = 0; j < names.size(); ++j) {
        json c{{"index", j}, {"name", names[j]}, {"position", positions[j]}};
        if (mutations) c["residue"] = std::string(1, (*mutations)[j].residue);
        cols.push_back(std::move(c));
    }
    return json{{"format", design_format}, {"p", names.size()}, {"structure", "positional"}, {"columns", cols}};
}

inline json read_json(const std::string& path)
{
    auto in = text::open_input(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
}

inline void write_json(const std::string& path, const json& doc)
{
    auto out = text::open_output(path);
    out << doc.dump(2) << '\n';
}

/// Positional structure from a design sidecar.
inline PredictorStructure read_positions(const std::string& path)
{
    const json doc = read_json(path);
    if (!doc.contains("columns") || !doc["columns"].is_array()) {
        throw ParseError(path, 0, "sidecar has no 'columns' array");
    }
    std::vector<long long> positions;
    try {
        for (const auto& c : doc["columns"]) positions.push_back(c.at("position").get<long long>());
    } catch (const json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
    return PredictorStructure::positional(std::move(positions));
}

/**
 * Graph structure from an edge list (`u v weight` per line) and a node map
 * (`predictor_index node` per line). Node labels are arbitrary tokens.
 */
inline PredictorStructure read_graph(const std::string& edge_path, const std::string& map_path, Index p)
{
    std::map<std::string, Index> node_ids;
    const auto node = [&](const std::string& label) {
        auto [it, inserted] = node_ids.emplace(label, static_cast<Index>(node_ids.size()));
        return it->second;
    };
    GraphSpec g;
    for (const auto& [no, line] : text::read_lines(edge_path)) {
        const auto f = text::split_whitespace(line);
        if (f.size() != 3) throw ParseError(edge_path, no, "expected 'u v weight'");
        const double w = text::parse_double(f[2], edge_path, no);
        if (w < 0.0) throw InvalidGraph(edge_path + ":" + std::to_string(no) + ": negative edge weight");
        g.edges.push_back({node(f[0]), node(f[1]), w});
    }
    g.predictor_node.assign(static_cast<std::size_t>(p), -1);
    for (const auto& [no, line] : text::read_lines(map_path)) {
        const auto f = text::split_whitespace(line);
        if (f.size() != 2) throw ParseError(map_path, no, "expected 'predictor_index node'");
        const auto j = text::parse_int(f[0], map_path, no);
        if (j < 0 || j >= p) throw ParseError(map_path, no, "predictor index out of range");
        g.predictor_node[static_cast<std::size_t>(j)] = node(f[1]);
    }
    for (Index j = 0; j < p; ++j) {
        if (g.predictor_node[static_cast<std::size_t>(j)] < 0) {
            throw InvalidGraph("predictor " + std::to_string(j) + " has no node in " + map_path);
        }
    }
    g.n_nodes = static_cast<Index>(node_ids.size());
    return PredictorStructure::graph(g);
}

inline json sparse_coefficients(const Vector& beta)
{
    json out = json::array();
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0) out.push_back(json{{"index", j}, {"value", beta(j)}});
    }
    return out;
}

inline json coefficients_json(const Dataset& prepared, const Vector& beta)
{
    const LinearModel model = to_original_scale(prepared, beta);
    return json{{"intercept", model.intercept},
                {"values", std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size())},
                {"fitted_scale", sparse_coefficients(beta)}};
}

inline json path_json(const FitPath& path, const Dataset& prepared, const std::vector<std::string>& names)
{
    json steps = json::array();
    for (std::size_t k = 0; k < path.steps.size(); ++k) {
        const auto& s = path.steps[k];
        steps.push_back(json{{"step", k},
                             {"index", s.index},
                             {"name", names[static_cast<std::size_t>(s.index)]},
                             {"score", s.score},
                             {"weight", s.weight},
                             {"rss", s.rss},
                             {"coefficients", sparse_coefficients(path.coefficients_per_step[k].values())}});
    }
    json skipped = json::array();
    for (const auto& s : path.skipped) {
        skipped.push_back(json{{"step", s.step}, {"index", s.index}, {"score", s.score}});
    }
    return json{{"selected", path.selected},
                {"selected_names", [&] {
                     std::vector<std::string> v;
                     for (auto j : path.selected) v.push_back(names[static_cast<std::size_t>(j)]);
                     return v;
                 }()},
                {"stop_reason", to_string(path.stop_reason)},
                {"terminal_score", std::isnan(path.terminal_score) ? json(nullptr) : json(path.terminal_score)},
                {"initial_rss", path.initial_rss},
                {"max_steps", path.step_cap},
                {"steps", steps},
                {"skipped", skipped},
                {"coefficients", coefficients_json(prepared, path.final.values())}};
}

/// One row per grid point: parameters, per-fold errors, mean, status.
inline void write_grid_table(std::ostream& os, const GridResult& result)
{
    const std::size_t folds = result.entries.empty() ? 0 : result.entries.front().fold_errors.size();
    os << "epsilon,h,alpha,lambda";
    for (std::size_t f = 0; f < folds; ++f) os << ",fold_" << f;
    os << ",mean,chosen,status\n";
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const auto& e = result.entries[i];
        os << number(e.point.epsilon) << ',' << number(e.point.h) << ',' << number(e.point.alpha) << ','
           << number(e.point.lambda);
        for (double v : e.fold_errors) os << ',' << (e.failed ? "NA" : number(v));
        os << ',' << (e.failed ? "NA" : number(e.mean)) << ',' << (i == result.chosen ? 1 : 0) << ','
           << (e.failed ? "failed" : "ok") << '\n';
    }
}

inline json grid_point_json(const GridPoint& pt)
{
    const auto opt = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    return json{{"epsilon", opt(pt.epsilon)}, {"h", opt(pt.h)}, {"alpha", opt(pt.alpha)}, {"lambda", opt(pt.lambda)}};
}

} // namespace caspar::io
