#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "ctxseg/errors.hpp"

namespace ctxseg {

// Directed flow network. Arcs are stored in pairs: arc 2k and its reverse
// 2k+1, so the reverse of arc a is always a^1.
struct FlowNetwork {
    int node_count = 0;
    int source = -1;
    int sink = -1;

    struct Arc {
        int to;
        double cap;
    };
    std::vector<Arc> arcs;
    std::vector<std::vector<int>> out;  // per-node incident arc indices (tail side)

    explicit FlowNetwork(int nodes, int src, int snk)
        : node_count(nodes), source(src), sink(snk), out(nodes) {
        require(nodes >= 2, "network needs at least source and sink");
        require(src != snk && src >= 0 && snk >= 0 && src < nodes && snk < nodes,
                "bad source/sink ids");
    }

    void add_arc(int u, int v, double cap, double rev_cap = 0.0) {
        require(cap >= 0.0 && rev_cap >= 0.0, "arc capacities must be non-negative");
        require(u >= 0 && u < node_count && v >= 0 && v < node_count, "arc endpoint out of range");
        if (u == v) return;
        out[u].push_back(static_cast<int>(arcs.size()));
        arcs.push_back({v, cap});
        out[v].push_back(static_cast<int>(arcs.size()));
        arcs.push_back({u, rev_cap});
    }

    int tail(int arc) const { return arcs[arc ^ 1].to; }
};

struct MaxFlowResult {
    double flow = 0.0;
    std::vector<bool> source_side;  // the certified min cut: S = {v : source_side[v]}

    double cut_capacity(const FlowNetwork& net) const {
        double cut = 0.0;
        for (std::size_t a = 0; a < net.arcs.size(); a += 2) {
            const int u = net.tail(static_cast<int>(a));
            const int v = net.arcs[a].to;
            if (source_side[u] && !source_side[v]) cut += net.arcs[a].cap;
            if (source_side[v] && !source_side[u]) cut += net.arcs[a ^ 1].cap;
        }
        return cut;
    }
};

// Max-flow with the Boykov-Kolmogorov augmenting-path scheme: search trees
// rooted at source and sink are grown once and repaired after augmentations
// instead of being rebuilt, which keeps repeated short paths on grid graphs
// cheap. Returns the flow value plus the source side of a certifying cut.
class BkMaxFlow {
public:
    explicit BkMaxFlow(const FlowNetwork& net) : net_(net) {}

    MaxFlowResult solve() {
        const int n = net_.node_count;
        res_.assign(net_.arcs.size(), 0.0);
        for (std::size_t a = 0; a < net_.arcs.size(); ++a) res_[a] = net_.arcs[a].cap;

        tree_.assign(n, kFree);
        parent_.assign(n, -1);
        active_.clear();
        orphans_.clear();

        tree_[net_.source] = kSource;
        tree_[net_.sink] = kSink;
        active_.push_back(net_.source);
        active_.push_back(net_.sink);

        double flow = 0.0;
        for (;;) {
            const int meet = grow();
            if (meet < 0) break;
            flow += augment(meet);
            adopt();
        }

        MaxFlowResult result;
        result.flow = flow;
        result.source_side.assign(n, false);
        for (int v = 0; v < n; ++v) result.source_side[v] = tree_[v] == kSource;
        return result;
    }

private:
    static constexpr char kFree = 0;
    static constexpr char kSource = 1;
    static constexpr char kSink = 2;

    // residual of arc a in the growth direction of tree t (away from source,
    // toward sink)
    double tree_res(int a, char t) const { return t == kSource ? res_[a] : res_[a ^ 1]; }

    int root_of(char t) const { return t == kSource ? net_.source : net_.sink; }

    // parent_[v] conventions: for an S-tree node the arc runs parent -> v,
    // for a T-tree node it runs v -> parent; both carry positive residual.
    int parent_node(int v) const {
        return tree_[v] == kSource ? net_.tail(parent_[v]) : net_.arcs[parent_[v]].to;
    }

    // Grows both trees; returns the connecting arc (oriented S -> T) when the
    // trees touch, or -1 when no augmenting path remains.
    int grow() {
        while (!active_.empty()) {
            const int p = active_.front();
            if (tree_[p] == kFree) {  // stale entry left behind by adoption
                active_.pop_front();
                continue;
            }
            const char t = tree_[p];
            for (int a : net_.out[p]) {
                if (tree_res(a, t) <= 0.0) continue;
                const int q = net_.arcs[a].to;
                if (tree_[q] == kFree) {
                    tree_[q] = t;
                    parent_[q] = t == kSource ? a : (a ^ 1);
                    active_.push_back(q);
                } else if (tree_[q] != t) {
                    return t == kSource ? a : (a ^ 1);
                }
            }
            active_.pop_front();
        }
        return -1;
    }

    double augment(int meet) {
        double bottleneck = res_[meet];
        for (int v = net_.tail(meet); v != net_.source; v = net_.tail(parent_[v]))
            bottleneck = std::min(bottleneck, res_[parent_[v]]);
        for (int v = net_.arcs[meet].to; v != net_.sink; v = net_.arcs[parent_[v]].to)
            bottleneck = std::min(bottleneck, res_[parent_[v]]);

        auto push = [&](int a) {
            res_[a] -= bottleneck;
            res_[a ^ 1] += bottleneck;
            return res_[a] <= 0.0;
        };

        push(meet);
        for (int v = net_.tail(meet); v != net_.source;) {
            const int a = parent_[v];
            const int next = net_.tail(a);
            if (push(a)) make_orphan(v);
            v = next;
        }
        for (int v = net_.arcs[meet].to; v != net_.sink;) {
            const int a = parent_[v];
            const int next = net_.arcs[a].to;
            if (push(a)) make_orphan(v);
            v = next;
        }
        return bottleneck;
    }

    void make_orphan(int v) {
        parent_[v] = -1;
        orphans_.push_back(v);
    }

    // Plain walk to the root. Returns path length, or -1 if the walk dead-ends
    // in an orphan (no validity caching: simple and safe).
    int root_distance(int q, char t) const {
        int d = 0;
        const int root = root_of(t);
        for (int u = q; u != root; u = parent_node(u)) {
            if (parent_[u] < 0 || tree_[u] != t) return -1;
            ++d;
            if (d > net_.node_count) return -1;  // guards against stale cycles
        }
        return d;
    }

    void adopt() {
        while (!orphans_.empty()) {
            const int v = orphans_.front();
            orphans_.pop_front();
            const char t = tree_[v];

            int best_arc = -1;
            int best_dist = std::numeric_limits<int>::max();
            for (int a : net_.out[v]) {
                const int q = net_.arcs[a].to;
                if (tree_[q] != t) continue;
                // as a child of q the arc must run q -> v (S tree) or v -> q (T tree)
                const double r = t == kSource ? res_[a ^ 1] : res_[a];
                if (r <= 0.0) continue;
                const int d = root_distance(q, t);
                if (d >= 0 && d < best_dist) {
                    best_dist = d;
                    best_arc = t == kSource ? (a ^ 1) : a;
                }
            }
            if (best_arc >= 0) {
                parent_[v] = best_arc;
                continue;
            }

            // v drops out of the tree; its children become orphans and
            // potential re-entry points become active again
            for (int a : net_.out[v]) {
                const int q = net_.arcs[a].to;
                if (tree_[q] != t) continue;
                const double r = t == kSource ? res_[a ^ 1] : res_[a];
                if (r > 0.0) active_.push_back(q);
                if (parent_[q] >= 0 && parent_node(q) == v) make_orphan(q);
            }
            tree_[v] = kFree;
        }
    }

    const FlowNetwork& net_;
    std::vector<double> res_;
    std::vector<char> tree_;
    std::vector<int> parent_;
    std::deque<int> active_;
    std::deque<int> orphans_;
};

inline MaxFlowResult max_flow(const FlowNetwork& net) { return BkMaxFlow(net).solve(); }

}  // namespace ctxseg
