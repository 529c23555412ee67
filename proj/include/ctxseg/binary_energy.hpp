#pragma once

#include <vector>

#include "ctxseg/errors.hpp"
#include "ctxseg/maxflow.hpp"

namespace ctxseg {

// Exact minimization of a binary energy
//   E(x) = sum_i e_i(x_i) + sum_(i,j) e_ij(x_i, x_j)
// with submodular pairwise terms (e01 + e10 >= e00 + e11), by reduction to
// min-cut. Convention: x=1 corresponds to the sink side of the cut.
class BinaryEnergy {
public:
    explicit BinaryEnergy(int var_count)
        : var_count_(var_count), cost0_(var_count, 0.0), cost1_(var_count, 0.0) {
        require(var_count >= 1, "energy needs at least one variable");
    }

    void add_unary(int x, double e0, double e1) {
        cost0_[x] += e0;
        cost1_[x] += e1;
    }

    // e00..e11 = energies of (x,y) = (0,0),(0,1),(1,0),(1,1)
    void add_pairwise(int x, int y, double e00, double e01, double e10, double e11) {
        const double slack = e01 + e10 - e00 - e11;
        check_invariant(slack >= -1e-12, "non-submodular pairwise term");
        constant_ += e00;
        add_unary(x, 0.0, e10 - e00);
        add_unary(y, 0.0, e11 - e10);
        if (slack > 0.0) edges_.push_back({x, y, slack});
    }

    struct Result {
        double energy;
        std::vector<bool> assignment;  // true = 1
    };

    Result minimize() const {
        const int s = var_count_;
        const int t = var_count_ + 1;
        FlowNetwork net(var_count_ + 2, s, t);
        double constant = constant_;
        for (int v = 0; v < var_count_; ++v) {
            // shift so both t-link capacities are non-negative
            const double m = std::min(cost0_[v], cost1_[v]);
            constant += m;
            const double c0 = cost0_[v] - m;
            const double c1 = cost1_[v] - m;
            // cap(s->v) is paid when v lands on the sink side (x=1), cap(v->t) when x=0
            if (c1 > 0.0) net.add_arc(s, v, c1);
            if (c0 > 0.0) net.add_arc(v, t, c0);
        }
        for (const auto& e : edges_) net.add_arc(e.x, e.y, e.cap);

        const MaxFlowResult cut = max_flow(net);
        Result r;
        r.energy = constant + cut.flow;
        r.assignment.resize(var_count_);
        for (int v = 0; v < var_count_; ++v) r.assignment[v] = !cut.source_side[v];
        return r;
    }

private:
    struct Edge {
        int x, y;
        double cap;
    };
    int var_count_;
    double constant_ = 0.0;
    std::vector<double> cost0_, cost1_;
    std::vector<Edge> edges_;
};

}  // namespace ctxseg
