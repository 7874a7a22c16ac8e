#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "json.hpp"

#include "gpspike/errors.hpp"
#include "gpspike/gp2d.hpp"

using namespace gpspike;

namespace {

const TownesProfile& profile() {
    static const TownesProfile t = solve_townes(RadialGrid{0.005, 4000});
    return t;
}

struct Setup {
    PotentialSpec spec = harmonic_spec(2.0);
    PotentialAnalysis an = find_critical_point(spec, profile());
};

const Setup& harmonic() {
    static const Setup s;
    return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InputError;
}

}  // namespace

TEST_CASE("linear oscillator ground state") {
    const auto& h = harmonic();
    const PeriodicGrid g{192, 6.0};
    auto st = minimize(h.spec, profile(), h.an, 0.0, g);
    // -Delta + |x|^2 has ground energy 2 with a Gaussian eigenfunction.
    CHECK(st.energy == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(st.mu == doctest::Approx(2.0).epsilon(1e-9));
    double norm = 0.0, err = 0.0;
    const double h2 = g.step() * g.step();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double x = g.coord(i), y = g.coord(j), v = st.u[g.index(i, j)];
            norm += v * v * h2;
            err = std::max(err, std::abs(v - std::exp(-(x * x + y * y) / 2.0) / std::sqrt(M_PI)));
        }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(err < 1e-8);
}

TEST_CASE("invalid strengths and grids") {
    const auto& h = harmonic();
    const double as = profile().a_star;
    CHECK(kind_of([&] { minimize(h.spec, profile(), h.an, as, PeriodicGrid{}); }) == ErrorKind::Collapse);
    CHECK(kind_of([&] { minimize(h.spec, profile(), h.an, 1.2 * as, PeriodicGrid{}); }) == ErrorKind::Collapse);
    CHECK(kind_of([&] { minimize(h.spec, profile(), h.an, -1.0, PeriodicGrid{}); }) == ErrorKind::InputError);
    CHECK(kind_of([&] { minimize(h.spec, profile(), h.an, 0.99 * as, PeriodicGrid{64, 4.0}); }) ==
          ErrorKind::GridTooCoarse);
}

TEST_CASE("sub-grid maximum from a synthetic peak") {
    const PeriodicGrid g{128, 2.0};
    const double cx = 0.0123, cy = -0.0217;
    std::vector<double> u(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double dx = g.coord(i) - cx, dy = g.coord(j) - cy;
            u[g.index(i, j)] = std::exp(-(dx * dx + 2.0 * dy * dy + 0.5 * dx * dy) / 0.2);
        }
    const Vec2 x = locate_maximum(g, u);
    CHECK(std::abs(x[0] - cx) < 0.05 * g.step());
    CHECK(std::abs(x[1] - cy) < 0.05 * g.step());
    CHECK(count_local_maxima(g, u) == 1);

    // Two separated bumps.
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double x1 = g.coord(i) - 1.0, x2 = g.coord(i) + 1.0, y = g.coord(j);
            u[g.index(i, j)] = std::exp(-(x1 * x1 + y * y) / 0.05) + 0.5 * std::exp(-(x2 * x2 + y * y) / 0.05);
        }
    CHECK(count_local_maxima(g, u) == 2);
    // A flat field: the first index wins and no shift is applied.
    std::fill(u.begin(), u.end(), 1.0);
    const Vec2 f = locate_maximum(g, u);
    CHECK(f[0] == g.coord(0));
    CHECK(f[1] == g.coord(0));
}

TEST_CASE("interpolation and spectral derivative") {
    const PeriodicGrid g{64, M_PI};
    std::vector<double> f(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) f[g.index(i, j)] = std::sin(g.coord(i)) * std::cos(2.0 * g.coord(j));
    const auto fx = spectral_derivative(g, f, 0), fy = spectral_derivative(g, f, 1);
    double ex = 0.0, ey = 0.0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double x = g.coord(i), y = g.coord(j);
            ex = std::max(ex, std::abs(fx[g.index(i, j)] - std::cos(x) * std::cos(2.0 * y)));
            ey = std::max(ey, std::abs(fy[g.index(i, j)] + 2.0 * std::sin(x) * std::sin(2.0 * y)));
        }
    CHECK(ex < 1e-12);
    CHECK(ey < 1e-12);
    // Bilinear is exact at nodes and for the bilinear function x y on a cell.
    CHECK(bilinear(g, f, g.coord(5), g.coord(9)) == doctest::Approx(f[g.index(5, 9)]));
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) f[g.index(i, j)] = g.coord(i) * g.coord(j);
    CHECK(bilinear(g, f, 0.31, -0.47) == doctest::Approx(0.31 * -0.47).epsilon(1e-12));
}

TEST_CASE("energy ordering and bubble shape") {
    const auto& h = harmonic();
    const double as = profile().a_star;
    const PeriodicGrid g{256, 4.0};
    double prev = 1e300;
    for (double f : {0.5, 0.8, 0.9, 0.95}) {
        auto st = minimize(h.spec, profile(), h.an, f * as, g);
        CHECK(st.energy < prev);
        CHECK(st.energy > 0.0);
        prev = st.energy;
        CHECK(st.el_residual < 1e-10);
        CHECK(st.local_maxima == 1);
        CHECK(std::hypot(st.x_max[0], st.x_max[1]) < 1e-10);
        // mu from the identity and from the Rayleigh quotient agree once converged.
        CHECK(st.mu_rayleigh == doctest::Approx(st.mu).epsilon(1e-9));
        CHECK(extract_mu(st) == doctest::Approx(st.mu));
        // Ground state is positive up to round-off.
        double lo = 0.0;
        for (double v : st.u) lo = std::min(lo, v);
        CHECK(lo > -1e-8);
    }
}

TEST_CASE("Pohozaev identities for the radial trap") {
    const auto& h = harmonic();
    const double a = 0.97 * profile().a_star;
    auto coarse = minimize(h.spec, profile(), h.an, a, PeriodicGrid{256, 4.0});
    auto fine = minimize(h.spec, profile(), h.an, a, PeriodicGrid{512, 4.0});
    const double delta = 3.0 * fine.scale.eps / h.an.lambda;
    auto rc = pohozaev_residual(coarse, h.spec, delta);
    auto rf = pohozaev_residual(fine, h.spec, delta);
    // Translation terms vanish by symmetry.
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(rf.area[j]) < 1e-12 * rf.scale);
        CHECK(std::abs(rf.mismatch[j]) < 1e-12 * rf.scale);
    }
    // The virial residual is interpolation error, second order in the step.
    CHECK(std::abs(rf.virial) < 2e-3 * rf.scale);
    CHECK(std::abs(rc.virial) / std::abs(rf.virial) > 3.5);
    CHECK(kind_of([&] { pohozaev_residual(fine, h.spec, 3.99); }) == ErrorKind::BallOutsideGrid);
    CHECK(kind_of([&] { pohozaev_residual(fine, h.spec, 0.0); }) == ErrorKind::BallOutsideGrid);
}

TEST_CASE("Pohozaev translation identity off centre") {
    const auto spec = cosine_spec(2, 0.05);
    const auto an = find_critical_point(spec, profile());
    const double a = 0.97 * profile().a_star;
    auto coarse = minimize(spec, profile(), an, a, PeriodicGrid{256, 4.0});
    auto fine = minimize(spec, profile(), an, a, PeriodicGrid{512, 4.0});
    const double delta = 3.0 * fine.scale.eps / an.lambda;
    auto rc = pohozaev_residual(coarse, spec, delta);
    auto rf = pohozaev_residual(fine, spec, delta);
    CHECK(rf.area[0] < 0.0);
    CHECK(std::abs(rf.mismatch[0]) < 0.05 * std::abs(rf.area[0]));
    CHECK(std::abs(rc.mismatch[0]) / std::abs(rf.mismatch[0]) > 3.0);
    CHECK(std::abs(rf.mismatch[1]) < 1e-12 * rf.scale);
    // The identity holds on every ball; on the doubled ball the force balance makes the area term tiny
    // while the mismatch stays at the discretization level.
    auto r2 = pohozaev_residual(fine, spec, 2.0 * delta);
    CHECK(std::abs(r2.area[0]) < 0.05 * std::abs(rf.area[0]));
    CHECK(std::abs(r2.mismatch[0]) < 1e-5 * r2.scale);
    CHECK(std::abs(rf.mismatch[0]) < 1e-5 * rf.scale);
    CHECK(fine.x_max[0] < 0.0);
    CHECK(std::abs(fine.x_max[1]) < 1e-10);
}

TEST_CASE("independent starts converge to one state") {
    const auto& h = harmonic();
    const double as = profile().a_star;
    const PeriodicGrid g{256, 4.0};
    auto res = uniqueness_probe(h.spec, profile(), h.an, 0.95 * as, g, 5, 7);
    CHECK(res.starts == 5);
    REQUIRE(res.energies.size() == 5);
    CHECK(res.max_distance < 1e-8);
    for (double e : res.energies) CHECK(e == doctest::Approx(res.energies[0]).epsilon(1e-12));
    CHECK(kind_of([&] { uniqueness_probe(h.spec, profile(), h.an, 0.95 * as, g, 4, 7); }) == ErrorKind::InputError);
    CHECK(kind_of([&] { uniqueness_probe(h.spec, profile(), h.an, 0.5 * as, g, 5, 7); }) == ErrorKind::InputError);
}

TEST_CASE("mirror-image starts reach the same state") {
    const auto& h = harmonic();
    const PeriodicGrid g{256, 4.0};
    std::vector<double> left(g.size()), right(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double x = g.coord(i), y = g.coord(j);
            left[g.index(i, j)] = std::exp(-((x + 0.6) * (x + 0.6) + (y - 0.3) * (y - 0.3)) / 0.4);
            right[g.index(i, j)] = std::exp(-((x - 0.6) * (x - 0.6) + (y - 0.3) * (y - 0.3)) / 0.4);
        }
    MinimizeOptions o1, o2;
    o1.initial = &left;
    o2.initial = &right;
    const double a = 0.95 * profile().a_star;
    auto s1 = minimize(h.spec, profile(), h.an, a, g, o1);
    auto s2 = minimize(h.spec, profile(), h.an, a, g, o2);
    double d = 0.0;
    for (std::size_t k = 0; k < s1.u.size(); ++k) d = std::max(d, std::abs(s1.u[k] - s2.u[k]));
    CHECK(d < 1e-8);
    CHECK(s1.energy == doctest::Approx(s2.energy).epsilon(1e-12));
}

TEST_CASE("sweep record") {
    const auto& h = harmonic();
    auto st = minimize(h.spec, profile(), h.an, 0.9 * profile().a_star, PeriodicGrid{256, 4.0});
    const auto j = nlohmann::json::parse(sweep_record_json(st));
    for (const char* key : {"a", "eps", "energy", "mu", "x_max", "iters", "el_residual"}) CHECK(j.contains(key));
    CHECK(j.size() == 7);
    CHECK(j["x_max"].size() == 2);
    CHECK(j["energy"].get<double>() == st.energy);
}
