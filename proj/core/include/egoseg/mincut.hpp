#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "egoseg/image.hpp"

namespace egoseg::mincut {

/// s/t max-flow on a sparse directed graph using the Boykov-Kolmogorov
/// search-tree algorithm (two trees grown from the terminals, reused across
/// augmentations). Nodes on the source side of the cut are "foreground".
class MaxFlowGraph {
public:
    using NodeId = int;

    explicit MaxFlowGraph(int node_count = 0, std::size_t edge_hint = 0);

    NodeId add_node();
    int node_count() const { return int(nodes_.size()); }

    /// Adds capacity from the source to `n` and from `n` to the sink. Both must
    /// be >= 0. Calls accumulate.
    void add_terminal_weights(NodeId n, double source_cap, double sink_cap);
    /// Adds an edge pair i->j (capacity `cap`) and j->i (capacity `rev_cap`).
    void add_edge(NodeId i, NodeId j, double cap, double rev_cap);

    /// Runs the algorithm; returns the max-flow value (equal to the min-cut capacity).
    double solve();

    /// After solve(): true iff `n` is reachable from the source in the residual
    /// graph. That set is the canonical (smallest) source side of a minimum cut.
    bool source_side(NodeId n) const { return reachable_[std::size_t(n)] != 0; }

private:
    static constexpr int kNone = -1;
    static constexpr int kTerminal = -2;
    static constexpr int kOrphan = -3;

    struct Node {
        int first = kNone;   // first outgoing arc
        int parent = kNone;  // arc towards the tree parent, or a marker above
        double tr_cap = 0.0; // >0: residual from source, <0: residual to sink
        long timestamp = 0;
        int dist = 0;
        bool in_sink_tree = false;
        bool active = false;
    };
    struct Arc {
        int head = 0;
        int next = kNone;
        double r_cap = 0.0;
    };

    static int sister(int a) { return a ^ 1; }
    void set_active(int n);
    int next_active();
    void augment(int middle_arc);
    void adopt_orphan(int n);
    void mark_reachable();

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::deque<int> active_;
    std::deque<int> orphans_;
    std::vector<std::uint8_t> reachable_;
    double flow_ = 0.0;
    long time_ = 0;
};

/// Forward neighbours of the 8-connected grid; each undirected edge is stored
/// once at its upper/left endpoint.
enum class Neighbor : int { east = 0, south = 1, south_east = 2, south_west = 3 };
inline constexpr std::array<Point, 4> neighbor_offsets{{{1, 0}, {0, 1}, {1, 1}, {-1, 1}}};

/// Pairwise penalty S_ij for every 8-connected edge; symmetric by construction.
class SmoothnessField {
public:
    SmoothnessField() = default;
    SmoothnessField(int width, int height, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    /// Weight of the edge from (x, y) to its neighbour in direction `d`.
    /// Zero when the neighbour lies outside the grid.
    double weight(int x, int y, Neighbor d) const { return w_[slot(x, y, d)]; }
    void set_weight(int x, int y, Neighbor d, double v);
    /// Weight of the edge between two 8-adjacent pixels, in either order.
    double between(Point a, Point b) const;

private:
    std::size_t slot(int x, int y, Neighbor d) const {
        return (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * 4 + std::size_t(d);
    }
    int width_ = 0;
    int height_ = 0;
    std::vector<double> w_;
};

/// Sobel gradient magnitude of the luminance, replicate border.
std::vector<double> sobel_magnitude(const Frame& frame);

/// S_ij = lambda * (1 - max(g_i, g_j)) with g the Sobel magnitude normalised to
/// [0, 1] by its frame maximum. A constant frame yields lambda everywhere.
/// Throws egoseg::Error unless lambda > 0.
SmoothnessField smoothness_from_gradient(const Frame& frame, double lambda);

/// Binary labeling problem on the pixel grid. `fg_cost[i]` is paid when pixel i
/// is labeled foreground, `bg_cost[i]` when it is labeled background.
struct PixelGraph {
    int width = 0;
    int height = 0;
    std::vector<double> fg_cost;
    std::vector<double> bg_cost;
    SmoothnessField smoothness;

    void validate() const;
};

/// E(L) = sum of per-pixel label costs + sum of S_ij over edges whose endpoints differ.
double energy(const PixelGraph& graph, const BinaryMask& labels);

struct Cut {
    BinaryMask labels;
    double flow = 0.0;
};

/// Globally minimal labeling. Among minimisers, a pixel is foreground iff it is
/// reachable from the source in the final residual graph.
Cut solve(const PixelGraph& graph);

} // namespace egoseg::mincut
