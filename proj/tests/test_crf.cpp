#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ctxseg/crf.hpp"
#include "ctxseg/rng.hpp"
#include "oracles.hpp"

using namespace ctxseg;

namespace {

CrfProblem random_problem(int w, int h, int c, double lambda, Rng& rng) {
    CrfProblem p;
    p.width = w;
    p.height = h;
    p.class_count = c;
    p.lambda = lambda;
    p.unary.resize(static_cast<std::size_t>(w) * h * c);
    // eighths keep all sums exactly representable
    for (auto& v : p.unary) v = static_cast<double>(rng.next_below(64)) / 8.0;
    return p;
}

int discontinuities(const CrfProblem& p, const Labeling& lab) {
    int d = 0;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            const int i = y * p.width + x;
            if (x + 1 < p.width && lab[i] != lab[i + 1]) ++d;
            if (y + 1 < p.height && lab[i] != lab[i + p.width]) ++d;
        }
    return d;
}

}  // namespace

TEST_CASE("build_unary") {
    const int w = 2, h = 2, c = 3;
    std::vector<ClassDistribution> appearance(w * h, ClassDistribution{0.7, 0.2, 0.1});
    LocationModel loc;  // empty is fine while omega = 0
    PresenceVector zeta{1.0, 1.0, 1.0};

    SECTION("omega 0, alpha 0 reduces to -log appearance") {
        UnaryOptions opt;
        opt.omega = 0.0;
        opt.alpha = 0.0;
        const CrfProblem p = build_unary(w, h, c, appearance, loc, zeta, opt, 0.0);
        CHECK_THAT(p.cost(0, 0), Catch::Matchers::WithinAbs(-std::log(0.7), 1e-12));
        CHECK_THAT(p.cost(3, 2), Catch::Matchers::WithinAbs(-std::log(0.1), 1e-12));
    }

    SECTION("omega 1 ignores appearance entirely") {
        LocationModel trained;
        trained.grid = 1;
        trained.class_count = c;
        trained.landscape = {0.5, 0.25, 0.25};
        trained.portrait = trained.landscape;
        UnaryOptions opt;
        opt.omega = 1.0;
        // empty appearance grid: it must never be touched
        const CrfProblem p =
            build_unary(w, h, c, {}, trained, zeta, opt, 0.0);
        CHECK_THAT(p.cost(0, 0), Catch::Matchers::WithinAbs(-std::log(0.5), 1e-12));
        CHECK_THAT(p.cost(2, 1), Catch::Matchers::WithinAbs(-std::log(0.25), 1e-12));
    }

    SECTION("a zero prior floors the cost at -log(eps)") {
        UnaryOptions opt;
        opt.omega = 0.0;
        opt.alpha = 1.0;
        PresenceVector suppressed{1.0, 0.0, 1.0};
        const CrfProblem p = build_unary(w, h, c, appearance, loc, suppressed, opt, 0.0);
        for (int i = 0; i < 4; ++i)
            CHECK_THAT(p.cost(i, 1), Catch::Matchers::WithinAbs(-std::log(opt.epsilon), 1e-12));
    }

    SECTION("omega outside [0,1] is rejected") {
        UnaryOptions opt;
        opt.omega = 1.5;
        CHECK_THROWS_AS(build_unary(w, h, c, appearance, loc, zeta, opt, 0.0), DataError);
    }
}

TEST_CASE("energy evaluation") {
    Rng rng(3);
    CrfProblem p = random_problem(2, 2, 2, 1.0, rng);

    SECTION("hand computation on a 2x2 problem") {
        // labeling (0,1 / 1,1): horizontal edge row0 differs, vertical left differs
        const Labeling lab{0, 1, 1, 1};
        const double expected = p.cost(0, 0) + p.cost(1, 1) + p.cost(2, 1) + p.cost(3, 1) +
                                1.0 * 2;  // two discordant 4-neighbor pairs
        CHECK_THAT(energy(p, lab), Catch::Matchers::WithinAbs(expected, 1e-12));
    }

    SECTION("uniform labeling has zero pairwise energy") {
        const Labeling lab{1, 1, 1, 1};
        const double expected = p.cost(0, 1) + p.cost(1, 1) + p.cost(2, 1) + p.cost(3, 1);
        CHECK_THAT(energy(p, lab), Catch::Matchers::WithinAbs(expected, 1e-12));
    }

    SECTION("with lambda 0 the unary argmin is the global minimum") {
        p.lambda = 0.0;
        const Labeling argmin = unary_argmin(p);
        oracles::PottsBrute brute{p.width, p.height, p.class_count, p.unary, 0.0};
        CHECK_THAT(energy(p, argmin), Catch::Matchers::WithinAbs(brute.minimum(), 1e-12));
    }
}

TEST_CASE("alpha expansion with lambda 0 returns the unary argmin exactly") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const CrfProblem p = random_problem(3, 3, 3, 0.0, rng);
        // start from a deliberately bad uniform init
        const Labeling result = alpha_expansion(p, Labeling(9, 2), 10);
        const Labeling argmin = unary_argmin(p);
        CHECK(energy(p, result) == energy(p, argmin));
    }
}

TEST_CASE("binary problems reach the exhaustive optimum") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const CrfProblem p = random_problem(3, 3, 2, 1.0, rng);
        const Labeling result = alpha_expansion(p, unary_argmin(p), 10);
        oracles::PottsBrute brute{3, 3, 2, p.unary, p.lambda};
        CHECK_THAT(energy(p, result), Catch::Matchers::WithinAbs(brute.minimum(), 1e-9));
    }
}

TEST_CASE("three-label problems: expansion bound and local optimality") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const CrfProblem p = random_problem(3, 3, 3, 1.5, rng);
        Labeling result = alpha_expansion(p, unary_argmin(p), 20);
        const double e = energy(p, result);
        oracles::PottsBrute brute{3, 3, 3, p.unary, p.lambda};
        const double optimum = brute.minimum();
        CHECK(e >= optimum - 1e-9);
        CHECK(e <= 2.0 * optimum + 1e-9);  // Potts expansion guarantee
        // no single expansion can improve the result further
        double current = e;
        for (int alpha = 0; alpha < 3; ++alpha) {
            Labeling copy = result;
            double ecopy = current;
            CHECK_FALSE(expand_label(p, copy, alpha, ecopy));
        }
    }
}

TEST_CASE("energy is monotone across sweeps") {
    Rng rng(5);
    const CrfProblem p = random_problem(6, 6, 4, 2.0, rng);
    Labeling lab(36, 3);
    double prev = energy(p, lab);
    for (int sweep = 0; sweep < 5; ++sweep) {
        double e = prev;
        for (int alpha = 0; alpha < 4; ++alpha) expand_label(p, lab, alpha, e);
        CHECK(e <= prev + 1e-12);
        prev = e;
    }
}

TEST_CASE("discontinuity count is non-increasing in lambda") {
    Rng rng(11);
    const CrfProblem base = random_problem(8, 8, 3, 0.0, rng);
    int prev = -1;
    for (const double lambda : {0.0, 1.0, 10.0}) {
        CrfProblem p = base;
        p.lambda = lambda;
        const Labeling lab = alpha_expansion(p, unary_argmin(p), 10);
        const int d = discontinuities(p, lab);
        if (prev >= 0) CHECK(d <= prev);
        prev = d;
    }
}

TEST_CASE("class permutation equivariance on tie-free problems") {
    Rng rng(13);
    const CrfProblem p = random_problem(4, 4, 3, 1.0, rng);
    const std::vector<int> perm{2, 0, 1};  // pi(c)

    CrfProblem q = p;
    for (int i = 0; i < 16; ++i)
        for (int c = 0; c < 3; ++c)
            q.unary[static_cast<std::size_t>(i) * 3 + perm[c]] =
                p.unary[static_cast<std::size_t>(i) * 3 + c];

    const Labeling lp = alpha_expansion(p, unary_argmin(p), 10);
    const Labeling lq = alpha_expansion(q, unary_argmin(q), 10);
    for (int i = 0; i < 16; ++i) CHECK(static_cast<int>(lq[i]) == perm[lp[i]]);
}

TEST_CASE("scalar prior mode scales costs outside the log") {
    const int w = 2, h = 1, c = 2;
    std::vector<ClassDistribution> appearance(2, ClassDistribution{0.8, 0.2});
    LocationModel loc;
    PresenceVector zeta{0.5, 0.9};
    UnaryOptions opt;
    opt.omega = 0.0;
    opt.alpha = 1.0;
    opt.scalar_prior = true;
    const CrfProblem p = build_unary(w, h, c, appearance, loc, zeta, opt, 0.0);
    const double scale = 0.7;  // mean of zeta
    CHECK_THAT(p.cost(0, 0), Catch::Matchers::WithinAbs(scale * -std::log(0.8), 1e-12));
    CHECK_THAT(p.cost(1, 1), Catch::Matchers::WithinAbs(scale * -std::log(0.2), 1e-12));
}
