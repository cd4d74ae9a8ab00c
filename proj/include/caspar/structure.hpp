#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>
#include <caspar/errors.hpp>
#include <caspar/linalg.hpp>

namespace caspar {

enum class KernelFamily
{
    boxcar,
    epanechnikov,
    gaussian,
};

inline std::string to_string(KernelFamily f)
{
    switch (f) {
        case KernelFamily::boxcar: return "boxcar";
        case KernelFamily::epanechnikov: return "epanechnikov";
        case KernelFamily::gaussian: return "gaussian";
    }
    return "unknown";
}

inline KernelFamily parse_kernel_family(const std::string& s)
{
    if (s == "boxcar") return KernelFamily::boxcar;
    if (s == "epanechnikov") return KernelFamily::epanechnikov;
    if (s == "gaussian") return KernelFamily::gaussian;
    throw InvalidArgument("unknown kernel family '" + s + "'");
}

/**
 * Stetson kernel: a floor alpha mixed with a peak-normalized base kernel,
 *
 *     K_{h,alpha}(d) = alpha + (1 - alpha) K_h(d),   K_h(0) = 1.
 *
 * Infinite distances give a base value of 0 for every family.
 */
struct KernelSpec
{
    KernelFamily family = KernelFamily::boxcar;
    double bandwidth = 1.0;
    double alpha = 1.0;

    void validate() const
    {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
            throw InvalidArgument("kernel bandwidth must be positive and finite");
        }
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw InvalidArgument("kernel mixing alpha must lie in [0, 1]");
        }
    }

    double base(double d) const
    {
        if (std::isinf(d)) return 0.0;
        const double u = d / bandwidth;
        switch (family) {
            case KernelFamily::boxcar: return d < bandwidth ? 1.0 : 0.0;
            case KernelFamily::epanechnikov: return std::max(0.0, 1.0 - u * u);
            case KernelFamily::gaussian: return std::exp(-0.5 * u * u);
        }
        return 0.0;
    }

    double operator()(double d) const { return alpha + (1.0 - alpha) * base(d); }
};

struct WeightedEdge
{
    Index u = 0;
    Index v = 0;
    double weight = 1.0;
};

/// Undirected weighted graph whose nodes include every predictor.
struct GraphSpec
{
    Index n_nodes = 0;
    std::vector<WeightedEdge> edges;
    /// predictor_node[j] = graph node carrying predictor j.
    std::vector<Index> predictor_node;
};

/**
 * Distance oracle over predictor indices with cached pairwise distances.
 *
 * Positional: d(j,k) = |pos_j - pos_k|. Graph: minimal weighted path
 * length between the predictors' nodes, +inf when disconnected.
 */
class PredictorStructure
{
public:
    enum class Variant
    {
        positional,
        graph,
    };

    PredictorStructure() = default;

    static PredictorStructure positional(std::vector<long long> positions)
    {
        PredictorStructure s;
        s.variant_ = Variant::positional;
        const auto p = static_cast<Index>(positions.size());
        s.distances_.resize(p, p);
        for (Index j = 0; j < p; ++j) {
            for (Index k = 0; k < p; ++k) {
                const long long diff = positions[static_cast<std::size_t>(j)]
                    - positions[static_cast<std::size_t>(k)];
                s.distances_(j, k) = static_cast<double>(diff < 0 ? -diff : diff);
            }
        }
        s.positions_ = std::move(positions);
        return s;
    }

    /// Positions 0, 1, ..., p-1.
    static PredictorStructure sequential(Index p)
    {
        std::vector<long long> pos(static_cast<std::size_t>(p));
        for (Index j = 0; j < p; ++j) pos[static_cast<std::size_t>(j)] = j;
        return positional(std::move(pos));
    }

    static PredictorStructure graph(const GraphSpec& g)
    {
        for (const auto& e : g.edges) {
            if (e.u < 0 || e.v < 0 || e.u >= g.n_nodes || e.v >= g.n_nodes) {
                throw InvalidGraph("edge endpoint outside node range");
            }
            if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
                throw InvalidGraph("edge weights must be finite and non-negative");
            }
        }
        for (auto node : g.predictor_node) {
            if (node < 0 || node >= g.n_nodes) throw InvalidGraph("predictor mapped to unknown node");
        }

        std::vector<std::vector<std::pair<Index, double>>> adj(static_cast<std::size_t>(g.n_nodes));
        for (const auto& e : g.edges) {
            adj[static_cast<std::size_t>(e.u)].emplace_back(e.v, e.weight);
            adj[static_cast<std::size_t>(e.v)].emplace_back(e.u, e.weight);
        }

        PredictorStructure s;
        s.variant_ = Variant::graph;
        const auto p = static_cast<Index>(g.predictor_node.size());
        s.distances_.resize(p, p);
        for (Index j = 0; j < p; ++j) {
            const auto dist = dijkstra(adj, g.predictor_node[static_cast<std::size_t>(j)]);
            for (Index k = 0; k < p; ++k) {
                s.distances_(j, k) = dist[static_cast<std::size_t>(g.predictor_node[static_cast<std::size_t>(k)])];
            }
        }
        // Symmetric by construction up to floating summation order.
        for (Index j = 0; j < p; ++j) {
            s.distances_(j, j) = 0.0;
            for (Index k = j + 1; k < p; ++k) {
                const double d = std::min(s.distances_(j, k), s.distances_(k, j));
                s.distances_(j, k) = s.distances_(k, j) = d;
            }
        }
        return s;
    }

    Variant variant() const { return variant_; }
    Index size() const { return distances_.rows(); }
    double distance(Index j, Index k) const { return distances_(j, k); }
    const Matrix& distances() const { return distances_; }
    const std::vector<long long>& positions() const { return positions_; }

private:
    static std::vector<double> dijkstra(const std::vector<std::vector<std::pair<Index, double>>>& adj,
                                        Index source)
    {
        std::vector<double> dist(adj.size(), std::numeric_limits<double>::infinity());
        using Item = std::pair<double, Index>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
        dist[static_cast<std::size_t>(source)] = 0.0;
        heap.emplace(0.0, source);
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[static_cast<std::size_t>(u)]) continue;
            for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
                const double nd = d + w;
                if (nd < dist[static_cast<std::size_t>(v)]) {
                    dist[static_cast<std::size_t>(v)] = nd;
                    heap.emplace(nd, v);
                }
            }
        }
        return dist;
    }

    Variant variant_ = Variant::positional;
    Matrix distances_;
    std::vector<long long> positions_;
};

inline const Matrix& pairwise_distances(const PredictorStructure& s) { return s.distances(); }

/**
 * Candidate weights for the next selection step.
 *
 * Empty active set: every weight is 1. Otherwise
 * W_l = alpha + (1 - alpha) * mean_{k in active} K_h(d(l, k)),
 * evaluated for every l (entries for active l are unused by the solver).
 */
inline Vector candidate_weights(const IndexSet& active, const KernelSpec& kernel,
                                const PredictorStructure& structure)
{
    const Index p = structure.size();
    Vector w = Vector::Ones(p);
    if (active.empty()) return w;
    for (auto k : active) {
        if (k < 0 || k >= p) throw DimensionMismatch("active index outside structure");
    }
    const double inv = 1.0 / static_cast<double>(active.size());
    for (Index l = 0; l < p; ++l) {
        double acc = 0.0;
        for (auto k : active) acc += kernel.base(structure.distance(l, k));
        // Clamp absorbs rounding of alpha + (1 - alpha) at the top of the range.
        w(l) = std::clamp(kernel.alpha + (1.0 - kernel.alpha) * (acc * inv), kernel.alpha, 1.0);
    }
    return w;
}

} // namespace caspar
