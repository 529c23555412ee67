#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctxseg/binary_energy.hpp"
#include "ctxseg/errors.hpp"
#include "ctxseg/ilp.hpp"
#include "ctxseg/image.hpp"
#include "ctxseg/location.hpp"
#include "ctxseg/stf.hpp"

namespace ctxseg {

// Per-pixel per-class costs on a 4-connected grid with a Potts pairwise term.
struct CrfProblem {
    int width = 0;
    int height = 0;
    int class_count = 0;
    std::vector<double> unary;  // pixel-major: unary[(y*width+x)*C + c]
    double lambda = 0.0;

    double cost(int pixel, int cls) const {
        return unary[static_cast<std::size_t>(pixel) * class_count + cls];
    }
    int pixels() const { return width * height; }
};

using Labeling = std::vector<std::uint8_t>;  // per-pixel class ids, row-major

struct UnaryOptions {
    double omega = 0.3;        // blend between appearance (0) and location (1)
    double alpha = 1.0;        // exponent on the image-level prior
    double epsilon = 1e-6;     // probability floor before the log
    bool scalar_prior = false; // apply the prior as a scalar weight instead of per-class
};

// Unary costs from the blended class beliefs:
//   p_i(c) = (1-omega) * appearance_i(c) + omega * location_i(c)
//   cost_i(c) = -log(max(eps, p_i(c) * zeta(c)^alpha))
// With scalar_prior the mean of zeta^alpha scales the cost outside the log
// instead. Appearance may be empty when omega = 1 (it is never consulted),
// and location may be empty when omega = 0.
inline CrfProblem build_unary(int width, int height, int class_count,
                              const std::vector<ClassDistribution>& appearance,
                              const LocationModel& location, const PresenceVector& zeta,
                              const UnaryOptions& opt, double lambda) {
    require(opt.omega >= 0.0 && opt.omega <= 1.0, "omega must lie in [0, 1]");
    require(opt.alpha >= 0.0, "alpha must be >= 0");
    require(lambda >= 0.0, "lambda must be >= 0");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (opt.omega < 1.0)
        require(appearance.size() == n, "appearance grid does not match image size");
    if (opt.omega > 0.0)
        require(!location.empty() && location.class_count == class_count,
                "location potentials missing or of wrong class count");
    require(static_cast<int>(zeta.size()) == class_count, "prior vector has wrong length");

    std::vector<double> prior(class_count, 1.0);
    double scalar_weight = 1.0;
    if (opt.scalar_prior) {
        double mean = 0.0;
        for (double z : zeta) mean += z;
        mean /= class_count;
        scalar_weight = std::pow(std::max(opt.epsilon, mean), opt.alpha);
    } else {
        for (int c = 0; c < class_count; ++c) prior[c] = std::pow(zeta[c], opt.alpha);
    }

    CrfProblem prob;
    prob.width = width;
    prob.height = height;
    prob.class_count = class_count;
    prob.lambda = lambda;
    prob.unary.resize(n * class_count);

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            for (int c = 0; c < class_count; ++c) {
                double p = 0.0;
                if (opt.omega < 1.0) p += (1.0 - opt.omega) * appearance[i][c];
                if (opt.omega > 0.0) p += opt.omega * location.lookup(width, height, x, y, c);
                double v;
                if (opt.scalar_prior)
                    v = scalar_weight * -std::log(std::max(opt.epsilon, p));
                else
                    v = -std::log(std::max(opt.epsilon, p * prior[c]));
                prob.unary[i * class_count + c] = v;
            }
        }
    }
    return prob;
}

inline double energy(const CrfProblem& prob, const Labeling& labeling) {
    require(static_cast<int>(labeling.size()) == prob.pixels(), "labeling size mismatch");
    double e = 0.0;
    for (int i = 0; i < prob.pixels(); ++i) e += prob.cost(i, labeling[i]);
    for (int y = 0; y < prob.height; ++y) {
        for (int x = 0; x < prob.width; ++x) {
            const int i = y * prob.width + x;
            if (x + 1 < prob.width && labeling[i] != labeling[i + 1]) e += prob.lambda;
            if (y + 1 < prob.height && labeling[i] != labeling[i + prob.width]) e += prob.lambda;
        }
    }
    return e;
}

inline Labeling unary_argmin(const CrfProblem& prob) {
    Labeling out(prob.pixels());
    for (int i = 0; i < prob.pixels(); ++i) {
        int best = 0;
        for (int c = 1; c < prob.class_count; ++c)
            if (prob.cost(i, c) < prob.cost(i, best)) best = c;  // ties: lowest class id
        out[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

// One expansion move: every pixel either keeps its label or switches to
// `alpha`; optimal for Potts by a single cut. Returns true if the labeling
// strictly improved.
inline bool expand_label(const CrfProblem& prob, Labeling& labeling, int alpha,
                         double& current_energy) {
    const int n = prob.pixels();
    BinaryEnergy be(n);
    for (int i = 0; i < n; ++i)
        be.add_unary(i, prob.cost(i, labeling[i]), prob.cost(i, alpha));

    const double lam = prob.lambda;
    if (lam > 0.0) {
        auto add_edge = [&](int i, int j) {
            const int li = labeling[i], lj = labeling[j];
            if (li == alpha && lj == alpha) return;
            be.add_pairwise(i, j, lam * (li != lj), lam * (li != alpha), lam * (alpha != lj), 0.0);
        };
        for (int y = 0; y < prob.height; ++y) {
            for (int x = 0; x < prob.width; ++x) {
                const int i = y * prob.width + x;
                if (x + 1 < prob.width) add_edge(i, i + 1);
                if (y + 1 < prob.height) add_edge(i, i + prob.width);
            }
        }
    }

    const BinaryEnergy::Result r = be.minimize();

    // accept on the recomputed energy, so fp noise in the reduction can never
    // push the labeling uphill
    Labeling candidate = labeling;
    for (int i = 0; i < n; ++i)
        if (r.assignment[i]) candidate[i] = static_cast<std::uint8_t>(alpha);
    const double candidate_energy = energy(prob, candidate);
    if (candidate_energy >= current_energy) return false;
    labeling = std::move(candidate);
    current_energy = candidate_energy;
    return true;
}

// Alpha-expansion over classes in ascending id, sweeping until a full sweep
// yields no improvement or max_sweeps is hit. Energy never increases.
inline Labeling alpha_expansion(const CrfProblem& prob, Labeling init, int max_sweeps = 10) {
    require(prob.class_count >= 1, "problem has no classes");
    Labeling labeling = std::move(init);
    double e = energy(prob, labeling);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool improved = false;
        for (int alpha = 0; alpha < prob.class_count; ++alpha)
            improved |= expand_label(prob, labeling, alpha, e);
        if (!improved) break;
    }
    return labeling;
}

}  // namespace ctxseg
