#pragma once

#include <cmath>
#include <vector>

#include "ctxseg/errors.hpp"
#include "ctxseg/matrix.hpp"
#include "ctxseg/stf.hpp"

namespace ctxseg {

// Leaf class distributions as observations: column i of the result is the
// distribution stored at leaf i, rows are classes. T = total leaves.
inline Matrix collect_leaf_observations(const TextonForest& forest) {
    require(forest.leaf_count >= 2, "need at least 2 leaves to observe class covariance");
    Matrix obs(forest.class_count, forest.leaf_count);
    for (const auto& tree : forest.trees) {
        for (const auto& node : tree.nodes) {
            if (!node.is_leaf()) continue;
            for (int c = 0; c < forest.class_count; ++c) obs(c, node.leaf_ordinal) = node.dist[c];
        }
    }
    return obs;
}

struct CorrelationResult {
    Matrix omega;                        // C x C, symmetric, unit diagonal
    std::vector<int> zero_variance;      // classes whose observation row is constant
};

// Pearson correlation between class rows. A zero-variance row would make the
// quotient undefined; those off-diagonal entries are set to 0 and the class is
// reported back to the caller.
inline CorrelationResult class_correlation(const Matrix& obs) {
    const int c = obs.rows;
    const int t = obs.cols;
    require(t >= 2, "covariance needs at least 2 observations");

    std::vector<double> mean(c, 0.0);
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < t; ++j) mean[i] += obs(i, j);
        mean[i] /= t;
    }

    Matrix cov(c, c);
    for (int i = 0; i < c; ++i) {
        for (int k = i; k < c; ++k) {
            double s = 0.0;
            for (int j = 0; j < t; ++j) s += (obs(i, j) - mean[i]) * (obs(k, j) - mean[k]);
            cov(i, k) = cov(k, i) = s / (t - 1);
        }
    }

    CorrelationResult res;
    res.omega = Matrix(c, c);
    for (int i = 0; i < c; ++i)
        if (cov(i, i) <= 0.0) res.zero_variance.push_back(i);

    for (int i = 0; i < c; ++i) {
        for (int k = 0; k < c; ++k) {
            if (i == k) {
                res.omega(i, k) = 1.0;
            } else if (cov(i, i) <= 0.0 || cov(k, k) <= 0.0) {
                res.omega(i, k) = 0.0;
            } else {
                double v = cov(i, k) / std::sqrt(cov(i, i) * cov(k, k));
                res.omega(i, k) = std::clamp(v, -1.0, 1.0);
            }
        }
    }
    return res;
}

// Distance used for class clustering: off-diagonals are the correlation
// shifted so the smallest value becomes zero, the diagonal is forced to zero.
// Highly correlated (mutually confusable) classes end up far apart.
inline Matrix correlation_distance(const Matrix& omega) {
    require(omega.rows == omega.cols && omega.rows >= 1, "correlation matrix must be square");
    const int c = omega.rows;
    double lo = 1e300;
    for (int i = 0; i < c; ++i)
        for (int k = 0; k < c; ++k)
            if (i != k) lo = std::min(lo, omega(i, k));
    if (c == 1) lo = 0.0;

    Matrix d(c, c);
    for (int i = 0; i < c; ++i)
        for (int k = 0; k < c; ++k) d(i, k) = i == k ? 0.0 : omega(i, k) - lo;
    return d;
}

}  // namespace ctxseg
