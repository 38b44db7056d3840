#include "egoseg/mincut.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace egoseg::mincut {

MaxFlowGraph::MaxFlowGraph(int node_count, std::size_t edge_hint) {
    nodes_.resize(std::size_t(std::max(node_count, 0)));
    arcs_.reserve(2 * edge_hint);
}

MaxFlowGraph::NodeId MaxFlowGraph::add_node() {
    nodes_.emplace_back();
    return NodeId(nodes_.size() - 1);
}

void MaxFlowGraph::add_terminal_weights(NodeId n, double source_cap, double sink_cap) {
    if (source_cap < 0.0 || sink_cap < 0.0) throw Error("terminal capacities must be non-negative");
    Node& node = nodes_.at(std::size_t(n));
    // Pushing min(source, sink) straight through the node leaves one residual.
    const double delta = node.tr_cap;
    if (delta > 0.0)
        source_cap += delta;
    else
        sink_cap -= delta;
    flow_ += std::min(source_cap, sink_cap);
    node.tr_cap = source_cap - sink_cap;
}

void MaxFlowGraph::add_edge(NodeId i, NodeId j, double cap, double rev_cap) {
    if (cap < 0.0 || rev_cap < 0.0) throw Error("edge capacities must be non-negative");
    if (i == j) return;
    const int a = int(arcs_.size());
    arcs_.push_back({j, nodes_.at(std::size_t(i)).first, cap});
    arcs_.push_back({i, nodes_.at(std::size_t(j)).first, rev_cap});
    nodes_[std::size_t(i)].first = a;
    nodes_[std::size_t(j)].first = a + 1;
}

void MaxFlowGraph::set_active(int n) {
    Node& node = nodes_[std::size_t(n)];
    if (!node.active) {
        node.active = true;
        active_.push_back(n);
    }
}

int MaxFlowGraph::next_active() {
    while (!active_.empty()) {
        const int n = active_.front();
        active_.pop_front();
        nodes_[std::size_t(n)].active = false;
        if (nodes_[std::size_t(n)].parent != kNone) return n;
    }
    return kNone;
}

void MaxFlowGraph::augment(int middle) {
    // bottleneck along source tree -> middle arc -> sink tree
    double bottleneck = arcs_[std::size_t(middle)].r_cap;
    int i = arcs_[std::size_t(sister(middle))].head;
    for (;;) {
        const int a = nodes_[std::size_t(i)].parent;
        if (a == kTerminal) break;
        bottleneck = std::min(bottleneck, arcs_[std::size_t(sister(a))].r_cap);
        i = arcs_[std::size_t(a)].head;
    }
    bottleneck = std::min(bottleneck, nodes_[std::size_t(i)].tr_cap);
    i = arcs_[std::size_t(middle)].head;
    for (;;) {
        const int a = nodes_[std::size_t(i)].parent;
        if (a == kTerminal) break;
        bottleneck = std::min(bottleneck, arcs_[std::size_t(a)].r_cap);
        i = arcs_[std::size_t(a)].head;
    }
    bottleneck = std::min(bottleneck, -nodes_[std::size_t(i)].tr_cap);

    arcs_[std::size_t(middle)].r_cap -= bottleneck;
    arcs_[std::size_t(sister(middle))].r_cap += bottleneck;

    i = arcs_[std::size_t(sister(middle))].head;
    for (;;) {
        Node& node = nodes_[std::size_t(i)];
        const int a = node.parent;
        if (a == kTerminal) break;
        arcs_[std::size_t(a)].r_cap += bottleneck;
        arcs_[std::size_t(sister(a))].r_cap -= bottleneck;
        if (arcs_[std::size_t(sister(a))].r_cap <= 0.0) {
            node.parent = kOrphan;
            orphans_.push_front(i);
        }
        i = arcs_[std::size_t(a)].head;
    }
    nodes_[std::size_t(i)].tr_cap -= bottleneck;
    if (nodes_[std::size_t(i)].tr_cap <= 0.0) {
        nodes_[std::size_t(i)].parent = kOrphan;
        orphans_.push_front(i);
    }

    i = arcs_[std::size_t(middle)].head;
    for (;;) {
        Node& node = nodes_[std::size_t(i)];
        const int a = node.parent;
        if (a == kTerminal) break;
        arcs_[std::size_t(sister(a))].r_cap += bottleneck;
        arcs_[std::size_t(a)].r_cap -= bottleneck;
        if (arcs_[std::size_t(a)].r_cap <= 0.0) {
            node.parent = kOrphan;
            orphans_.push_front(i);
        }
        i = arcs_[std::size_t(a)].head;
    }
    nodes_[std::size_t(i)].tr_cap += bottleneck;
    if (nodes_[std::size_t(i)].tr_cap >= 0.0) {
        nodes_[std::size_t(i)].parent = kOrphan;
        orphans_.push_front(i);
    }

    flow_ += bottleneck;
}

void MaxFlowGraph::adopt_orphan(int i) {
    constexpr int kInfDist = std::numeric_limits<int>::max();
    Node& orphan = nodes_[std::size_t(i)];
    const bool sink = orphan.in_sink_tree;
    int best_arc = kNone;
    int best_dist = kInfDist;

    for (int a0 = orphan.first; a0 != kNone; a0 = arcs_[std::size_t(a0)].next) {
        // residual capacity from the candidate parent towards the orphan (source
        // tree) or from the orphan towards the candidate parent (sink tree)
        const double cap = sink ? arcs_[std::size_t(a0)].r_cap : arcs_[std::size_t(sister(a0))].r_cap;
        if (cap <= 0.0) continue;
        int j = arcs_[std::size_t(a0)].head;
        if (nodes_[std::size_t(j)].in_sink_tree != sink || nodes_[std::size_t(j)].parent == kNone) continue;

        // Walk to the root to check the candidate is still attached to a terminal.
        int d = 0;
        for (;;) {
            Node& nj = nodes_[std::size_t(j)];
            if (nj.timestamp == time_) {
                d += nj.dist;
                break;
            }
            const int a = nj.parent;
            ++d;
            if (a == kTerminal) {
                nj.timestamp = time_;
                nj.dist = 1;
                break;
            }
            if (a == kOrphan) {
                d = kInfDist;
                break;
            }
            j = arcs_[std::size_t(a)].head;
        }
        if (d == kInfDist) continue;
        if (d < best_dist) {
            best_arc = a0;
            best_dist = d;
        }
        // cache distances along the verified path
        for (j = arcs_[std::size_t(a0)].head; nodes_[std::size_t(j)].timestamp != time_;
             j = arcs_[std::size_t(nodes_[std::size_t(j)].parent)].head) {
            nodes_[std::size_t(j)].timestamp = time_;
            nodes_[std::size_t(j)].dist = d--;
        }
    }

    if (best_arc != kNone) {
        orphan.parent = best_arc;
        orphan.timestamp = time_;
        orphan.dist = best_dist + 1;
        return;
    }

    // No valid parent: the orphan becomes free; its children become orphans and
    // neighbours that could reach it are reactivated.
    for (int a0 = orphan.first; a0 != kNone; a0 = arcs_[std::size_t(a0)].next) {
        const int j = arcs_[std::size_t(a0)].head;
        Node& nj = nodes_[std::size_t(j)];
        const int a = nj.parent;
        if (nj.in_sink_tree != sink || a == kNone) continue;
        const double cap = sink ? arcs_[std::size_t(a0)].r_cap : arcs_[std::size_t(sister(a0))].r_cap;
        if (cap > 0.0) set_active(j);
        if (a != kTerminal && a != kOrphan && arcs_[std::size_t(a)].head == i) {
            nj.parent = kOrphan;
            orphans_.push_back(j);
        }
    }
    orphan.parent = kNone;
}

double MaxFlowGraph::solve() {
    active_.clear();
    orphans_.clear();
    time_ = 0;
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
        Node& node = nodes_[n];
        node.active = false;
        node.timestamp = 0;
        if (node.tr_cap > 0.0) {
            node.in_sink_tree = false;
            node.parent = kTerminal;
            node.dist = 1;
            set_active(int(n));
        } else if (node.tr_cap < 0.0) {
            node.in_sink_tree = true;
            node.parent = kTerminal;
            node.dist = 1;
            set_active(int(n));
        } else {
            node.parent = kNone;
        }
    }

    int current = kNone;
    for (;;) {
        int i = current;
        if (i == kNone || nodes_[std::size_t(i)].parent == kNone) {
            i = next_active();
            if (i == kNone) break;
        }
        current = kNone;

        // growth
        int middle = kNone;
        const Node& ni = nodes_[std::size_t(i)];
        for (int a = ni.first; a != kNone; a = arcs_[std::size_t(a)].next) {
            const bool sink = ni.in_sink_tree;
            const double cap = sink ? arcs_[std::size_t(sister(a))].r_cap : arcs_[std::size_t(a)].r_cap;
            if (cap <= 0.0) continue;
            const int j = arcs_[std::size_t(a)].head;
            Node& nj = nodes_[std::size_t(j)];
            if (nj.parent == kNone) {
                nj.in_sink_tree = sink;
                nj.parent = sister(a);
                nj.timestamp = ni.timestamp;
                nj.dist = ni.dist + 1;
                set_active(j);
            } else if (nj.in_sink_tree != sink) {
                middle = sink ? sister(a) : a;
                break;
            } else if (nj.timestamp <= ni.timestamp && nj.dist > ni.dist) {
                // shorten paths opportunistically
                nj.parent = sister(a);
                nj.timestamp = ni.timestamp;
                nj.dist = ni.dist + 1;
            }
        }

        ++time_;
        if (middle == kNone) continue;

        current = i;
        augment(middle);
        while (!orphans_.empty()) {
            const int o = orphans_.front();
            orphans_.pop_front();
            adopt_orphan(o);
        }
    }

    mark_reachable();
    return flow_;
}

void MaxFlowGraph::mark_reachable() {
    reachable_.assign(nodes_.size(), 0);
    std::vector<int> stack;
    for (std::size_t n = 0; n < nodes_.size(); ++n)
        if (nodes_[n].tr_cap > 0.0) {
            reachable_[n] = 1;
            stack.push_back(int(n));
        }
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int a = nodes_[std::size_t(i)].first; a != kNone; a = arcs_[std::size_t(a)].next) {
            const int j = arcs_[std::size_t(a)].head;
            if (arcs_[std::size_t(a)].r_cap > 0.0 && !reachable_[std::size_t(j)]) {
                reachable_[std::size_t(j)] = 1;
                stack.push_back(j);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Grid graphs

SmoothnessField::SmoothnessField(int width, int height, double fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw Error("smoothness field dimensions must be positive");
    w_.assign(std::size_t(width) * std::size_t(height) * 4, 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int d = 0; d < 4; ++d) {
                const Point o = neighbor_offsets[std::size_t(d)];
                if (x + o.x >= 0 && x + o.x < width && y + o.y < height) w_[slot(x, y, Neighbor(d))] = fill;
            }
}

void SmoothnessField::set_weight(int x, int y, Neighbor d, double v) {
    const Point o = neighbor_offsets[std::size_t(d)];
    if (x + o.x < 0 || x + o.x >= width_ || y + o.y >= height_) return;
    w_[slot(x, y, d)] = v;
}

double SmoothnessField::between(Point a, Point b) const {
    if (b.y < a.y || (b.y == a.y && b.x < a.x)) std::swap(a, b);
    for (int d = 0; d < 4; ++d) {
        const Point o = neighbor_offsets[std::size_t(d)];
        if (a.x + o.x == b.x && a.y + o.y == b.y) return weight(a.x, a.y, Neighbor(d));
    }
    throw Error("pixels are not 8-adjacent");
}

std::vector<double> sobel_magnitude(const Frame& frame) {
    const int w = frame.width(), h = frame.height();
    std::vector<double> lum(frame.pixel_count());
    for (std::size_t i = 0; i < lum.size(); ++i) lum[i] = luminance(frame.pixels()[i]);
    const auto L = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return lum[std::size_t(y) * std::size_t(w) + std::size_t(x)];
    };
    std::vector<double> mag(lum.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = (L(x + 1, y - 1) + 2 * L(x + 1, y) + L(x + 1, y + 1)) -
                              (L(x - 1, y - 1) + 2 * L(x - 1, y) + L(x - 1, y + 1));
            const double gy = (L(x - 1, y + 1) + 2 * L(x, y + 1) + L(x + 1, y + 1)) -
                              (L(x - 1, y - 1) + 2 * L(x, y - 1) + L(x + 1, y - 1));
            mag[std::size_t(y) * std::size_t(w) + std::size_t(x)] = std::hypot(gx, gy);
        }
    return mag;
}

SmoothnessField smoothness_from_gradient(const Frame& frame, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("smoothness weight lambda must be positive");
    auto g = sobel_magnitude(frame);
    const double peak = *std::max_element(g.begin(), g.end());
    if (peak > 0.0)
        for (double& v : g) v /= peak;
    const int w = frame.width(), h = frame.height();
    SmoothnessField field(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int d = 0; d < 4; ++d) {
                const Point o = neighbor_offsets[std::size_t(d)];
                const int nx = x + o.x, ny = y + o.y;
                if (nx < 0 || nx >= w || ny >= h) continue;
                const double gi = g[std::size_t(y) * std::size_t(w) + std::size_t(x)];
                const double gj = g[std::size_t(ny) * std::size_t(w) + std::size_t(nx)];
                field.set_weight(x, y, Neighbor(d), lambda * (1.0 - std::max(gi, gj)));
            }
    return field;
}

void PixelGraph::validate() const {
    const std::size_t n = std::size_t(width) * std::size_t(height);
    if (width <= 0 || height <= 0) throw Error("pixel graph dimensions must be positive");
    if (fg_cost.size() != n || bg_cost.size() != n) throw Error("terminal costs do not match graph size");
    if (smoothness.width() != width || smoothness.height() != height)
        throw Error("smoothness field does not match graph size");
    for (std::size_t i = 0; i < n; ++i)
        if (!(fg_cost[i] >= 0.0) || !(bg_cost[i] >= 0.0) || !std::isfinite(fg_cost[i]) || !std::isfinite(bg_cost[i]))
            throw Error("terminal costs must be finite and non-negative");
}

double energy(const PixelGraph& graph, const BinaryMask& labels) {
    if (labels.width() != graph.width || labels.height() != graph.height) throw Error("labeling size mismatch");
    double e = 0.0;
    for (int y = 0; y < graph.height; ++y)
        for (int x = 0; x < graph.width; ++x) {
            const std::size_t i = labels.index(x, y);
            e += labels[i] ? graph.fg_cost[i] : graph.bg_cost[i];
            for (int d = 0; d < 4; ++d) {
                const Point o = neighbor_offsets[std::size_t(d)];
                const int nx = x + o.x, ny = y + o.y;
                if (nx < 0 || nx >= graph.width || ny >= graph.height) continue;
                if (labels.at(x, y) != labels.at(nx, ny)) e += graph.smoothness.weight(x, y, Neighbor(d));
            }
        }
    return e;
}

Cut solve(const PixelGraph& graph) {
    graph.validate();
    const int w = graph.width, h = graph.height;
    MaxFlowGraph g(w * h, std::size_t(w) * std::size_t(h) * 4);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int i = y * w + x;
            // A source-side (foreground) pixel cuts its sink arc, paying fg_cost.
            g.add_terminal_weights(i, graph.bg_cost[std::size_t(i)], graph.fg_cost[std::size_t(i)]);
            for (int d = 0; d < 4; ++d) {
                const Point o = neighbor_offsets[std::size_t(d)];
                const int nx = x + o.x, ny = y + o.y;
                if (nx < 0 || nx >= w || ny >= h) continue;
                const double s = graph.smoothness.weight(x, y, Neighbor(d));
                if (s < 0.0 || !std::isfinite(s)) throw Error("smoothness weights must be finite and non-negative");
                if (s > 0.0) g.add_edge(i, ny * w + nx, s, s);
            }
        }
    Cut cut;
    cut.flow = g.solve();
    cut.labels = BinaryMask(w, h);
    for (int i = 0; i < w * h; ++i) cut.labels.set(std::size_t(i), g.source_side(i));
    return cut;
}

} // namespace egoseg::mincut
