#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <boost/numeric/odeint.hpp>

#include "gpspike/errors.hpp"
#include "gpspike/radial_core.hpp"

using namespace gpspike;

namespace {

const TownesProfile& profile() {
    static const TownesProfile t = solve_townes(RadialGrid{0.005, 4000});
    return t;
}

// Independent oracle: adaptive Dormand-Prince shooting with the mass carried as a third
// component, stopped at r = 10 and closed with the analytic K0 tail.
struct Oracle {
    double w0;
    double a_star;
};

Oracle dopri_oracle() {
    namespace ode = boost::numeric::odeint;
    using state = std::array<double, 3>;
    auto sys = [](const state& s, state& d, double r) {
        d[0] = s[1];
        d[1] = -s[1] / r + s[0] - s[0] * s[0] * s[0];
        d[2] = 2.0 * M_PI * r * s[0] * s[0];
    };
    auto run = [&](double w0, double rend, state& out) {
        const double r0 = 1e-4, a2 = (w0 - w0 * w0 * w0) / 4.0;
        state s{w0 + a2 * r0 * r0, 2 * a2 * r0, 2.0 * M_PI * w0 * w0 * r0 * r0 / 2.0};
        auto stepper = ode::make_controlled(1e-14, 1e-14, ode::runge_kutta_dopri5<state>());
        double r = r0, dr = 1e-3;
        int sign = 0;
        while (r < rend) {
            if (r + dr > rend) dr = rend - r;
            if (stepper.try_step(sys, s, r, dr) == ode::fail) continue;
            if (s[0] < 0) { sign = 1; break; }
            if (s[1] > 0) { sign = -1; break; }
        }
        out = s;
        return sign;
    };
    double lo = 2.0, hi = 2.4;
    state s;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const int sign = run(mid, 14.0, s);
        if (sign > 0) hi = mid;
        else if (sign < 0) lo = mid;
        else break;
    }
    const double w0 = 0.5 * (lo + hi);
    run(w0, 10.0, s);
    const double c = s[0] / std::cyl_bessel_k(0.0, 10.0);
    // Tail mass by Simpson on [10, 40].
    double tail = 0.0;
    const int n = 6000;
    const double h = 30.0 / n;
    for (int i = 0; i <= n; ++i) {
        const double r = 10.0 + i * h, wt = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        const double k = c * std::cyl_bessel_k(0.0, r);
        tail += wt * r * k * k;
    }
    tail *= 2.0 * M_PI * h / 3.0;
    return {w0, s[2] + tail};
}

}  // namespace

TEST_CASE("shooting value and critical mass agree with an independent integrator") {
    const auto& t = profile();
    const Oracle o = dopri_oracle();
    CHECK(t.w0 == doctest::Approx(o.w0).epsilon(1e-9));
    CHECK(t.a_star == doctest::Approx(o.a_star).epsilon(1e-7));
    CHECK(t.w0 == doctest::Approx(2.2062).epsilon(1e-4));
    CHECK(t.a_star == doctest::Approx(11.70).epsilon(1e-3));
}

TEST_CASE("virial identities hold to 1e-6") {
    const auto rep = radial_identity_report(profile());
    CHECK(std::abs(rep.grad_vs_mass) < 1e-6);
    CHECK(std::abs(rep.mass_vs_quartic) < 1e-6);
}

TEST_CASE("weighted radial identities vanish") {
    const auto rep = radial_identity_report(profile());
    CHECK(std::abs(rep.rho1) < 1e-5);
    CHECK(std::abs(rep.rho2) < 1e-5);
    CHECK(std::abs(rep.rho3) < 1e-5);
}

TEST_CASE("profile shape: positive, decreasing, exponential tail") {
    const auto& t = profile();
    CHECK(t.w[0] == t.w0);
    CHECK(t.dw[0] == 0.0);
    CHECK(std::abs(t.w.back()) < 1e-8);
    CHECK(t.ode_residual < 1e-8);
    CHECK(t.shoot_width <= 1e-12);
    double lo = 1e300, hi = 0.0;
    for (std::size_t i = 0; i < t.r.size(); ++i) {
        if (i + 1 < t.r.size()) REQUIRE(t.w[i + 1] < t.w[i]);
        if (t.r[i] > 5.0) {
            const double env = t.w[i] * std::sqrt(t.r[i]) * std::exp(t.r[i]);
            lo = std::min(lo, env);
            hi = std::max(hi, env);
        }
    }
    CHECK(hi / lo < 1.2);
}

TEST_CASE("interpolant reproduces nodes and the ODE") {
    const auto& t = profile();
    CHECK(t.value(t.r[123]) == doctest::Approx(t.w[123]).epsilon(1e-15));
    CHECK(t.deriv(t.r[987]) == doctest::Approx(t.dw[987]).epsilon(1e-14));
    CHECK(t.second(0.0) == doctest::Approx(0.5 * (t.w0 - std::pow(t.w0, 3))));
    CHECK(t.value(25.0) == 0.0);
    // Interpolant between nodes against a finer direct solve.
    const auto fine = solve_townes(RadialGrid{0.0025, 8000});
    double err = 0.0;
    for (double r = 0.0013; r < 8.0; r += 0.0371) err = std::max(err, std::abs(t.value(r) - fine.value(r)));
    CHECK(err < 1e-11);
}

TEST_CASE("grid refinement moves a* by less than the discretisation budget") {
    const auto coarse = solve_townes(RadialGrid{0.01, 2000});
    const double diff = std::abs(coarse.a_star - profile().a_star);
    CHECK(diff < 4.0 * 1e-6 * profile().a_star);
}

TEST_CASE("Gagliardo-Nirenberg ratio") {
    const auto& t = profile();
    const auto grid = CartesianGrid2D::make(20.0, 0.05);
    SUBCASE("optimiser attains one") {
        CHECK(gn_ratio(townes_field(t, grid), t) == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("gaussian matches closed form a*/(4 pi)") {
        const auto g = sample(grid, [](double x, double y) { return std::exp(-(x * x + y * y) / 2); });
        const double r = gn_ratio(g, t);
        CHECK(r == doctest::Approx(t.a_star / (4 * M_PI)).epsilon(1e-6));
        CHECK(r < 1.0);
    }
    SUBCASE("dilation invariance") {
        const auto big = CartesianGrid2D::make(30.0, 0.05);
        const auto u = sample(big, [&](double x, double y) { return t.value(std::hypot(x, y) / 2); });
        CHECK(gn_ratio(u, t) == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("zero field") {
        CHECK_THROWS_AS(gn_ratio(Field2D(grid), t), Error);
    }
}

TEST_CASE("GN ratio stays below one for random compactly supported fields") {
    const auto& t = profile();
    const auto grid = CartesianGrid2D::make(8.0, 0.1);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> c(-3, 3), s(1.0, 3.0), amp(0.1, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        struct Bump { double x, y, s, a; };
        std::vector<Bump> bumps;
        for (int b = 0; b < 3; ++b) bumps.push_back({c(rng), c(rng), s(rng), amp(rng)});
        const auto u = sample(grid, [&](double x, double y) {
            double v = 0.0;
            for (const auto& b : bumps) {
                const double q = 1.0 - ((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (b.s * b.s);
                if (q > 0) v += b.a * q * q * q * q;
            }
            return v;
        });
        worst = std::max(worst, gn_ratio(u, t));
    }
    CHECK(worst <= 1.0 + 1e-8);
}

TEST_CASE("profile cache round trip and header check") {
    const auto& t = profile();
    const auto path = (std::filesystem::temp_directory_path() / "gpspike_profile_test.txt").string();
    save_profile(path, t);
    const auto back = load_profile(path, t.grid);
    CHECK(back.w0 == t.w0);
    CHECK(back.w[2500] == t.w[2500]);
    CHECK(back.a_star == doctest::Approx(t.a_star).epsilon(1e-15));
    CHECK_THROWS_AS(load_profile(path, RadialGrid{0.01, 2000}), Error);
    std::ofstream(path) << "# something else\n";
    CHECK_THROWS_AS(load_profile(path, t.grid), Error);
    std::filesystem::remove(path);
}

TEST_CASE("input validation and tail failure") {
    CHECK_THROWS_AS(solve_townes(RadialGrid{0.005, 2000}), Error);  // R = 10 < 15
    try {
        TownesOptions opts;
        opts.tail_tol = 1e-12;
        solve_townes(RadialGrid{0.005, 3000}, opts);
        FAIL("expected TailNotDecayed");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TailNotDecayed);
    }
}
