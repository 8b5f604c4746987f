#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <spectral/measure.hpp>

using namespace spectral;
using Catch::Approx;

namespace {
Vec vec1(double x) {
    Vec v(1);
    v << x;
    return v;
}
Vec vec2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}
}  // namespace

TEST_CASE("omega_lambda basics") {
    QuadratureConfig grid2 = QuadratureConfig::defaults_for(2);

    SECTION("V == 0: the sublevel set fills the whole unit ball") {
        auto z = builtin("zero", 2);
        auto est = omega_lambda(z, vec2(7.0, -3.0), 1.0, grid2);
        CHECK(est.value == Approx(M_PI).margin(0.01));
        CHECK(est.std_error == 0.0);

        QuadratureConfig mc = grid2;
        mc.method = QuadMethod::monte_carlo;
        auto mce = omega_lambda(z, vec2(7.0, -3.0), 1.0, mc);
        CHECK(mce.value == Approx(M_PI).margin(1e-9));  // indicator is 1 everywhere
    }

    SECTION("V = x0^2 far out: empty sublevel set, exactly zero") {
        auto h = builtin("harmonic", 1);
        auto est = omega_lambda(h, vec1(5.0), 1.0, QuadratureConfig::defaults_for(1));
        CHECK(est.value == 0.0);
    }

    SECTION("flagship cross potential at (10,0): frozen quadrature oracle") {
        // analytic cross-check: 2 * int_9^11 min(1/x, sqrt(1-(x-10)^2)) dx
        const double oracle = 0.4006328740317883;
        auto c = builtin("cross_xy");
        QuadratureConfig mc = grid2;
        mc.method = QuadMethod::monte_carlo;
        mc.samples = 2'000'000;
        auto est = omega_lambda(c, vec2(10.0, 0.0), 1.0, mc);
        CHECK(est.value == Approx(oracle).margin(4.0 * est.std_error));

        auto g = omega_lambda(c, vec2(10.0, 0.0), 1.0, grid2);
        CHECK(g.value == Approx(oracle).margin(0.01));
    }
}

TEST_CASE("weak vanishing integral") {
    SECTION("V == 0 gives |B_a|") {
        auto z = builtin("zero", 2);
        auto est = weak_vanishing_integral(z, vec2(3.0, 4.0), QuadratureConfig::defaults_for(2));
        CHECK(est.value == Approx(M_PI).margin(0.01));
    }
    SECTION("V = x0^2 at a=10: arctan(11) - arctan(9)") {
        auto h = builtin("harmonic", 1);
        auto est = weak_vanishing_integral(h, vec1(10.0), QuadratureConfig::defaults_for(1));
        CHECK(est.value == Approx(0.01999733397315051).epsilon(1e-3));
    }
    SECTION("cross potential along the axis decays like c/A") {
        auto c = builtin("cross_xy");
        QuadratureConfig cfg = QuadratureConfig::defaults_for(2);
        std::vector<double> A = {8, 16, 32, 64}, vals;
        // frozen adaptive-quadrature oracle values
        std::vector<double> oracle = {0.69564, 0.36931, 0.19036, 0.09666};
        for (std::size_t i = 0; i < A.size(); ++i) {
            vals.push_back(weak_vanishing_integral(c, vec2(A[i], 0.0), cfg).value);
            CHECK(vals.back() == Approx(oracle[i]).epsilon(0.02));
        }
        auto dv = decay_test(A, vals, cfg);
        CHECK(dv.verdict == Decay::decaying);
        CHECK(dv.loglog_slope == Approx(-1.0).margin(0.25));
    }
}

TEST_CASE("decay_test verdicts") {
    QuadratureConfig cfg;
    std::vector<double> radii = {1, 2, 4, 8};

    auto d1 = decay_test(radii, {1.0, 0.5, 0.25, 0.125}, cfg);
    CHECK(d1.verdict == Decay::decaying);
    CHECK(d1.loglog_slope == Approx(-1.0).margin(1e-9));

    auto d2 = decay_test(radii, {M_PI, M_PI, M_PI, M_PI}, cfg);
    CHECK(d2.verdict == Decay::not_decaying);
    CHECK(d2.loglog_slope == Approx(0.0).margin(1e-12));

    auto d3 = decay_test(radii, {1.0, 1.1, 0.2, 0.9}, cfg);
    CHECK(d3.verdict == Decay::inconclusive);

    CHECK(decay_test(radii, {0, 0, 0, 0}, cfg).verdict == Decay::decaying);
    CHECK(decay_test(radii, {1.0, 0.4, 0.1, 0.0}, cfg).verdict == Decay::decaying);

    CHECK_THROWS(decay_test({1, 2, 3}, {1, 2, 3}, cfg));
    CHECK_THROWS(decay_test({1, 2, 2, 3}, {1, 1, 1, 1}, cfg));

    SECTION("noisy Monte Carlo ladder for the cross potential still reads decaying") {
        auto c = builtin("cross_xy");
        QuadratureConfig mc = QuadratureConfig::defaults_for(2);
        mc.method = QuadMethod::monte_carlo;
        mc.samples = 20000;
        mc.ladder = {4.0, 2.0, 5};
        Vec dir = vec2(1.0, 0.0);
        auto noisy = omega_decay_along(c, dir, 1.0, mc);
        // oracle: rerun with 10x the samples
        mc.samples = 200000;
        auto fine = omega_decay_along(c, dir, 1.0, mc);
        CHECK(noisy.verdict == Decay::decaying);
        CHECK(fine.verdict == Decay::decaying);
    }
}

TEST_CASE("monotonicity and scaling invariants") {
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> ua(-12.0, 12.0), ul(0.2, 3.0);
    auto c = builtin("cross_xy");
    QuadratureConfig mc = QuadratureConfig::defaults_for(2);
    mc.method = QuadMethod::monte_carlo;
    mc.samples = 50000;

    for (int t = 0; t < 12; ++t) {
        Vec a = vec2(ua(rng), ua(rng));
        double l1 = ul(rng), l2 = l1 + ul(rng);
        mc.seed = 1000 + static_cast<std::uint64_t>(t);
        auto e1 = omega_lambda(c, a, l1, mc);
        auto e2 = omega_lambda(c, a, l2, mc);
        // lambda -> omega_lambda nondecreasing within noise
        CHECK(e2.value >= e1.value - 2.0 * (e1.std_error + e2.std_error));

        // {V < l} == {2V < 2l}
        auto doubled = PotentialSpec{PotentialExpr::parse("2*(x0^2*x1^2)", 2), {}, "2cross"};
        auto e3 = omega_lambda(doubled, a, 2.0 * l1, mc);
        CHECK(e3.value == Approx(e1.value).margin(2.0 * (e1.std_error + e3.std_error) + 1e-12));

        // radius -> sublevel measure within B_a(r) nondecreasing
        double r1 = 0.5 + 0.5 * ul(rng), r2 = r1 + 0.5;
        auto s1 = sublevel_measure(c, Ball(a, r1), l1, mc);
        auto s2 = sublevel_measure(c, Ball(a, r2), l1, mc);
        CHECK(s2.value >= s1.value - 2.0 * (s1.std_error + s2.std_error));
    }
}

TEST_CASE("grid and Monte Carlo agree on random instances") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> ua(-6.0, 6.0), ul(0.3, 4.0);
    std::vector<PotentialSpec> family = {
        builtin("cross_xy"),
        builtin("harmonic", 2),
        PotentialSpec{PotentialExpr::parse("abs(x0) + abs(x1)", 2), {}, "l1cone"},
        PotentialSpec{PotentialExpr::parse("x0^2 - x1", 2), {}, "saddle"},
    };
    int checked = 0;
    for (int t = 0; t < 50; ++t) {
        const auto& V = family[static_cast<std::size_t>(t) % family.size()];
        Vec a = vec2(ua(rng), ua(rng));
        double lambda = ul(rng);
        QuadratureConfig g = QuadratureConfig::defaults_for(2);
        g.grid_divisor = 128;
        QuadratureConfig mc = g;
        mc.method = QuadMethod::monte_carlo;
        mc.samples = 100000;
        mc.seed = 5000 + static_cast<std::uint64_t>(t);
        auto eg = omega_lambda(V, a, lambda, g);
        auto em = omega_lambda(V, a, lambda, mc);
        double tol = 3.0 * em.std_error + 0.02;  // grid bias floor at divisor 128
        CHECK(std::abs(eg.value - em.value) <= tol);
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("omega_p_integral: divergence and convergence") {
    SECTION("half space: truncated integrals grow linearly") {
        auto hs = builtin("half_space_flat");
        auto cfg = QuadratureConfig::defaults_for(1);
        auto r = omega_p_integral(hs, 0.5, 1.0, 64.0, cfg, 0.5, 0.02);
        CHECK(r.divergent);
        CHECK(r.growth_exponent == Approx(1.0).margin(0.2));
    }
    SECTION("bump holes: converges to the ball-family sum") {
        auto b = builtin("bump_holes");
        auto cfg = QuadratureConfig::defaults_for(1);
        // oracle: sum over holes k=1..3 inside radius 70 of (2 r_k)^2
        const double oracle = 1.0 + 0.25 + 0.0625;
        auto r = omega_p_integral(b, 1.0, 1.0, 70.0, cfg, 0.25, 0.005);
        CHECK_FALSE(r.divergent);
        CHECK(r.estimate.value == Approx(oracle).margin(0.15));
        // coarse upper bound: sum over the enlarged ball family
        double upper = 0.0;
        for (int k = 1; k <= 6; ++k) upper += 2.0 * (std::pow(2.0, -k) + 1.0) * 2.0;  // |B(c_k, r_k+1)| * max(omega)
        CHECK(r.estimate.value <= upper);
    }
    SECTION("empty sublevel region gives zero") {
        auto ten = PotentialSpec{PotentialExpr::parse("10", 1), {}, "ten"};
        auto cfg = QuadratureConfig::defaults_for(1);
        auto r = omega_p_integral(ten, 1.0, 1.0, 16.0, cfg);
        CHECK(r.estimate.value == 0.0);
        CHECK_FALSE(r.divergent);
    }
}

TEST_CASE("covering lower bound values") {
    CHECK(covering_lower_bound(0.0, 3, 1.5) == 0.0);
    CHECK(covering_lower_bound(2.0, 2, 1.0) == 1.0);
    CHECK_THROWS(covering_lower_bound(1.0, 0, 1.0));
}

TEST_CASE("sandwich estimate") {
    QuadratureConfig cfg = QuadratureConfig::defaults_for(2);
    Ball W(Vec::Zero(2), 1.0);

    SECTION("indicator of a half space") {
        auto phi = PotentialSpec{PotentialExpr::parse("step(-x0)", 2), {}, "hs"};
        for (double ax : {-3.0, -0.5, 0.0, 0.5, 3.0}) {
            auto r = wv_sandwich_check(phi, vec2(ax, 0.4), 0.5, W, cfg);
            CHECK(r.holds);
        }
    }
    SECTION("phi == 0") {
        auto phi = builtin("zero", 2);
        auto r = wv_sandwich_check(phi, vec2(1.0, 2.0), 0.7, W, cfg);
        CHECK(r.holds);
    }
    SECTION("phi = 1/(1+x0^2 x1^2), randomized windows") {
        auto phi = PotentialSpec{PotentialExpr::parse("1/(1 + x0^2*x1^2)", 2), {}, "invcross"};
        QuadratureConfig mc = cfg;
        mc.method = QuadMethod::monte_carlo;
        mc.samples = 20000;
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> u(-50.0, 50.0);
        for (int t = 0; t < 100; ++t) {
            mc.seed = static_cast<std::uint64_t>(t) + 99;
            double lambda = (t % 2 == 0) ? 0.1 : 0.5;
            auto r = wv_sandwich_check(phi, vec2(u(rng), u(rng)), lambda, W, mc, 1.0);
            CHECK(r.holds);
        }
    }
}
