#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "ctxseg/errors.hpp"
#include "ctxseg/matrix.hpp"

namespace ctxseg {

struct ClusterAssignment {
    std::vector<int> cluster_of;  // class id -> cluster id in [0, K)
    int cluster_count = 1;

    std::vector<std::vector<int>> members() const {
        std::vector<std::vector<int>> out(cluster_count);
        for (std::size_t c = 0; c < cluster_of.size(); ++c) out[cluster_of[c]].push_back(int(c));
        return out;
    }
};

enum class Linkage { average, single, complete };

inline Linkage linkage_from_string(const std::string& s) {
    if (s == "average") return Linkage::average;
    if (s == "single") return Linkage::single;
    if (s == "complete") return Linkage::complete;
    throw DataError("unknown linkage: " + s);
}

namespace detail {

struct MergeStep {
    double height;
    std::vector<int> partition;  // class -> group id, after this merge
};

}  // namespace detail

// Agglomerative clustering on a class distance matrix. The dendrogram is cut
// at the smallest merge height whose partition leaves every cluster with at
// least `min_members` classes; if no such cut exists everything collapses to
// a single cluster. Ties in the merge order go to the lexicographically
// smallest pair of cluster representatives, so results are deterministic.
inline ClusterAssignment cluster_classes(const Matrix& dist, int min_members = 3,
                                         Linkage linkage = Linkage::average) {
    const int c = dist.rows;
    require(c >= 1 && dist.rows == dist.cols, "distance matrix must be square");
    require(min_members >= 1, "min_members must be >= 1");

    // active cluster state
    std::vector<std::vector<int>> members(c);
    std::vector<int> rep(c);  // smallest class id in the cluster, for tie-breaking
    std::vector<bool> alive(c, true);
    Matrix d = dist;
    for (int i = 0; i < c; ++i) {
        members[i] = {i};
        rep[i] = i;
    }

    std::vector<int> part(c);
    for (int i = 0; i < c; ++i) part[i] = i;

    std::vector<detail::MergeStep> steps;
    steps.reserve(c - 1);

    for (int merge = 0; merge < c - 1; ++merge) {
        int best_i = -1, best_j = -1;
        double best_d = 1e300;
        for (int i = 0; i < c; ++i) {
            if (!alive[i]) continue;
            for (int j = i + 1; j < c; ++j) {
                if (!alive[j]) continue;
                double dij = d(i, j);
                bool better = dij < best_d;
                if (dij == best_d && best_i >= 0) {
                    better = std::pair(rep[i], rep[j]) < std::pair(rep[best_i], rep[best_j]);
                }
                if (better) {
                    best_d = dij;
                    best_i = i;
                    best_j = j;
                }
            }
        }

        // merge j into i
        const double ni = static_cast<double>(members[best_i].size());
        const double nj = static_cast<double>(members[best_j].size());
        for (int k = 0; k < c; ++k) {
            if (!alive[k] || k == best_i || k == best_j) continue;
            double dik = d(best_i, k), djk = d(best_j, k);
            double merged;
            switch (linkage) {
                case Linkage::single: merged = std::min(dik, djk); break;
                case Linkage::complete: merged = std::max(dik, djk); break;
                default: merged = (ni * dik + nj * djk) / (ni + nj); break;
            }
            d(best_i, k) = d(k, best_i) = merged;
        }
        members[best_i].insert(members[best_i].end(), members[best_j].begin(),
                               members[best_j].end());
        rep[best_i] = std::min(rep[best_i], rep[best_j]);
        alive[best_j] = false;
        for (int k : members[best_i]) part[k] = best_i;

        detail::MergeStep step;
        step.height = steps.empty() ? best_d : std::max(best_d, steps.back().height);
        step.partition = part;
        steps.push_back(std::move(step));
    }

    auto satisfies = [&](const std::vector<int>& partition) {
        std::vector<int> count(c, 0);
        for (int g : partition) ++count[g];
        for (int g = 0; g < c; ++g)
            if (count[g] > 0 && count[g] < min_members) return false;
        return true;
    };

    if (min_members == 1) {
        // the all-singletons cut (below every merge) is already valid
        ClusterAssignment a;
        a.cluster_of.resize(c);
        for (int i = 0; i < c; ++i) a.cluster_of[i] = i;
        a.cluster_count = c;
        return a;
    }

    const std::vector<int>* chosen = nullptr;
    // walk cut heights in increasing order; merges at equal height apply together
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i + 1 < steps.size() && steps[i + 1].height == steps[i].height) continue;
        if (satisfies(steps[i].partition)) {
            chosen = &steps[i].partition;
            break;
        }
    }

    ClusterAssignment a;
    a.cluster_of.assign(c, 0);
    if (chosen == nullptr) {
        a.cluster_count = 1;  // no admissible cut: all classes together
        return a;
    }
    // relabel groups by smallest member class id
    std::vector<int> group_of_class = *chosen;
    std::vector<int> order;
    for (int i = 0; i < c; ++i)
        if (std::find(order.begin(), order.end(), group_of_class[i]) == order.end())
            order.push_back(group_of_class[i]);
    for (int i = 0; i < c; ++i) {
        a.cluster_of[i] = static_cast<int>(
            std::find(order.begin(), order.end(), group_of_class[i]) - order.begin());
    }
    a.cluster_count = static_cast<int>(order.size());
    return a;
}

}  // namespace ctxseg
