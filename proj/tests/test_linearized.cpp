#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gpspike/errors.hpp"
#include "gpspike/linearized.hpp"

using namespace gpspike;

namespace {

const TownesProfile& profile() {
    static const TownesProfile t = solve_townes(RadialGrid{0.005, 4000});
    return t;
}

// x . grad w evaluated from the analytic radial derivative.
Field2D dilation_mode(const CartesianGrid2D& g) {
    const auto& t = profile();
    return sample(g, [&](double x, double y) {
        const double r = std::hypot(x, y);
        return t.value(r) + r * t.deriv(r);
    });
}

double rel_error_closed_form(double dx) {
    const auto g = CartesianGrid2D::make(16.0, dx);
    const LinearOperator op(profile(), g);
    const Field2D psi = solve_mod_kernel(op, op.w());
    const Field2D exact = build_psi2(op);
    return max_abs(combine(1.0, psi, -1.0, exact)) / max_abs(exact);
}

}  // namespace

TEST_CASE("translation and dilation modes") {
    const auto g = CartesianGrid2D::make(16.0, 0.05);
    const LinearOperator op(profile(), g);
    const double wmax = max_abs(op.w());
    CHECK(max_abs(op.apply(op.dw(0))) < 1e-3 * wmax);
    CHECK(max_abs(op.apply(op.dw(1))) < 1e-3 * wmax);
    const Field2D lw = op.apply(dilation_mode(g));
    CHECK(max_abs(combine(1.0, lw, 2.0, op.w())) < 1e-3 * wmax);
    // L w = -2 w^3 from the profile equation.
    Field2D w3 = multiply(op.w(), multiply(op.w(), op.w()));
    CHECK(max_abs(combine(1.0, op.apply(op.w()), 2.0, w3)) < 1e-3 * wmax);
}

TEST_CASE("preconditioner inverts -Lap + 1 exactly") {
    const auto g = CartesianGrid2D::make(3.0, 0.1);
    const LinearOperator op(profile(), g);
    Field2D u = sample(g, [](double x, double y) { return std::exp(-x * x - 2 * y * y) * (1 + x); });
    for (int k = 0; k < g.side(); ++k) u.at(0, k) = u.at(g.side() - 1, k) = u.at(k, 0) = u.at(k, g.side() - 1) = 0;
    // (-Lap + 1) u = L u + 3 w^2 u
    Field2D a = op.apply(u);
    for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] += 3 * op.w().values[k] * op.w().values[k] * u.values[k];
    Field2D back(g);
    op.precondition(a.values.data(), back.values.data());
    CHECK(max_abs(combine(1.0, back, -1.0, u)) < 1e-12);
}

TEST_CASE("closed-form correction for forcing w, with refinement") {
    const double coarse = rel_error_closed_form(0.1);
    const double fine = rel_error_closed_form(0.05);
    MESSAGE("closed-form errors " << coarse << " " << fine);
    CHECK(fine < 1e-3);
    CHECK(coarse / fine >= 3.0);
}

TEST_CASE("kernel forcing is rejected") {
    const auto g = CartesianGrid2D::make(12.0, 0.1);
    const LinearOperator op(profile(), g);
    try {
        solve_mod_kernel(op, op.dw(0));
        FAIL("expected NotSolvable");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotSolvable);
    }
}

TEST_CASE("solution is unique modulo the gradient normalisation") {
    const auto g = CartesianGrid2D::make(12.0, 0.1);
    const LinearOperator op(profile(), g);
    const Field2D f = sample(g, [](double x, double y) { return (x * x - 0.3 * y + x * y) * std::exp(-x * x - y * y); });
    // Remove the kernel part so the forcing is admissible.
    Field2D fa = f;
    for (int j = 0; j < 2; ++j) fa = combine(1.0, fa, -dot(fa, op.dw(j)) / dot(op.dw(j), op.dw(j)), op.dw(j));
    SolveReport rep;
    const Field2D psi = solve_mod_kernel(op, fa, &rep);
    const auto g0 = gradient_at_origin(psi);
    CHECK(std::abs(g0[0]) < 1e-10);
    CHECK(std::abs(g0[1]) < 1e-10);
    CHECK(rep.residual < 1e-4);
    CHECK(std::abs(rep.shift_det) > 0.1);
    const Field2D moved = combine(1.0, psi, 0.01, op.dw(0));
    CHECK(std::abs(gradient_at_origin(moved)[0]) > 1e-3);
}

TEST_CASE("radial shortcut agrees with the closed form") {
    const auto& t = profile();
    const auto psi = solve_radial(t, t.w);
    double err = 0.0;
    for (std::size_t i = 0; i < t.r.size(); i += 7) err = std::max(err, std::abs(psi[i] + 0.5 * (t.w[i] + t.r[i] * t.dw[i])));
    CHECK(err < 1e-4);
}

TEST_CASE("identity suite for homogeneous traps") {
    const auto g = CartesianGrid2D::make(20.0, 0.1);
    const LinearOperator op(profile(), g);
    const Field2D w3 = multiply(op.w(), multiply(op.w(), op.w()));
    for (double p : {2.0, 3.0, 4.0}) {
        CAPTURE(p);
        const auto spec = harmonic_spec(p);
        const auto an = find_critical_point(spec, profile());
        const auto c = build_corrections(op, spec, an);
        CHECK(std::abs(dot(op.w(), c.psi1)) < 1e-2);
        CHECK(std::abs(dot(op.w(), c.psi2)) < 1e-2);
        CHECK(std::abs(2 * dot(op.w(), c.psi4) + dot(c.psi2, c.psi2)) < 1e-2);
        CHECK(2 * dot(op.w(), c.psi5) + 2 * dot(c.psi1, c.psi2) == doctest::Approx(-(2 + p) / 2).epsilon(0.02));
        CHECK(dot(w3, c.psi1) == doctest::Approx((p + 1) / p).epsilon(0.01));
        CHECK(c.y_sup == Vec2{0.0, 0.0});
        CHECK(c.psi4_radial_agreement < 2e-3);
        CHECK(radial_asymmetry(c.psi4) < 1e-3);
        CHECK(reflection_asymmetry(c.psi1) < 1e-8);
        for (const Field2D* f : {&c.psi1, &c.psi3, &c.psi4, &c.psi5}) {
            const auto gr = gradient_at_origin(*f);
            CHECK(std::hypot(gr[0], gr[1]) < 1e-8);
        }
        if (p == 2.0) {
            const double cstar = 0.5 * (2 * dot(op.w(), c.psi3) + dot(c.psi1, c.psi1));
            CHECK(cstar == doctest::Approx(0.34134).epsilon(1e-3));
        }
    }
}

TEST_CASE("closed-form psi2 values") {
    const auto g = CartesianGrid2D::make(16.0, 0.05);
    const LinearOperator op(profile(), g);
    const Field2D psi2 = build_psi2(op);
    CHECK(psi2.at(g.half_count, g.half_count) == doctest::Approx(-profile().w0 / 2).epsilon(1e-12));
    CHECK(psi2.at(g.half_count, g.half_count) == doctest::Approx(-1.103).epsilon(1e-3));
    Field2D lw = op.apply(psi2);
    CHECK(max_abs(combine(1.0, lw, -1.0, op.w())) < 1e-3);
}

TEST_CASE("asymmetric trap: y-sup system and downstream solvability") {
    const auto g = CartesianGrid2D::make(16.0, 0.1);
    const LinearOperator op(profile(), g);
    const auto spec = cosine_spec(2.0, 0.05);
    const auto an = find_critical_point(spec, profile());
    const Field2D psi1 = build_psi1(op, spec, an);
    const auto ys = solve_y_sup(op, spec, an, psi1);
    CHECK(std::isfinite(ys.y_sup[0]));
    CHECK(ys.y_sup[0] > 0.0);
    CHECK(std::abs(ys.y_sup[1]) < 1e-10);
    // Independent quadrature of the psi3 forcing against the translation modes.
    const double lam_p1 = an.lambda_pow / an.lambda;
    const Field2D f3 = sample(g, [&](double x, double y) {
        const auto& t = profile();
        const double w = t.value(std::hypot(x, y));
        const double p1 = interpolate(psi1, x, y);
        const double h = spec.h(x + an.y0[0], y + an.y0[1]);
        const Vec2 dh = spec.grad_h(x + an.y0[0], y + an.y0[1]);
        return 3 * w * p1 * p1 - (3 * w * w / t.a_star + h / an.lambda_pow) * p1 -
               w / lam_p1 * (ys.y_sup[0] * dh[0] + ys.y_sup[1] * dh[1]);
    });
    for (int j = 0; j < 2; ++j) CHECK(std::abs(dot(f3, op.dw(j))) < 1e-4 * l2_norm(f3) * l2_norm(op.dw(j)));
    const auto p = build_psi345(op, spec, an, psi1, build_psi2(op), ys.y_sup);
    CHECK(2 * dot(op.w(), p.psi5) + 2 * dot(psi1, build_psi2(op)) == doctest::Approx(-2.0).epsilon(0.02));
}

TEST_CASE("solvability fails away from the critical point") {
    const auto g = CartesianGrid2D::make(14.0, 0.1);
    const LinearOperator op(profile(), g);
    const auto spec = cosine_spec(2.0, 0.05);
    auto an = find_critical_point(spec, profile());
    an.y0[0] += 0.1;
    CHECK_THROWS_AS(build_psi1(op, spec, an), Error);
    // <f1, d_j w> = d_j H / (p H) for the perturbed centre.
    const Vec2 dH = eval_grad_H(spec, profile(), an.y0);
    const Field2D f = sample(g, [&](double x, double y) {
        return -2.0 * spec.h(x + an.y0[0], y + an.y0[1]) * profile().value(std::hypot(x, y)) / (2.0 * an.H0);
    });
    CHECK(dot(f, op.dw(0)) == doctest::Approx(dH[0] / (2.0 * an.H0)).epsilon(1e-4));
}

TEST_CASE("envelope correction phi") {
    const auto g = CartesianGrid2D::make(16.0, 0.1);
    const LinearOperator op(profile(), g);
    SUBCASE("constant envelope gives zero") {
        auto spec = harmonic_spec(2.0);
        parse_envelope("const:1.5", spec);
        const auto an = find_critical_point(spec, profile());
        const auto ph = build_phi(op, spec, an);
        CHECK(max_abs(ph.phi) == 0.0);
        CHECK(ph.x0 == Vec2{0.0, 0.0});
    }
    SUBCASE("even order is solvable without x0") {
        auto spec = harmonic_spec(2.0);
        parse_envelope("taylor:m=2,coeffs=[1,0.5,0]", spec);
        const auto an = find_critical_point(spec, profile());
        const auto ph = build_phi(op, spec, an);
        CHECK(ph.x0 == Vec2{0.0, 0.0});
        CHECK(max_abs(ph.phi) > 0.0);
        CHECK(max_abs(combine(1.0, op.apply(ph.phi), -1.0, ph.forcing)) < 1e-3);
    }
    SUBCASE("odd order determines x0") {
        auto spec = harmonic_spec(2.0);
        parse_envelope("taylor:m=3,coeffs=[1,0,0,0]", spec);
        const auto an = find_critical_point(spec, profile());
        const auto ph = build_phi(op, spec, an);
        CHECK(std::isfinite(ph.x0[0]));
        CHECK(std::abs(ph.x0[0]) > 1e-3);
        CHECK(std::abs(ph.x0[1]) < 1e-10);
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(dot(ph.forcing, op.dw(j))) < 1e-4 * l2_norm(ph.forcing) * l2_norm(op.dw(j)));
    }
    SUBCASE("odd h is rejected") {
        auto spec = cosine_spec(2.0, 0.05);
        parse_envelope("taylor:m=2,coeffs=[1,0,0]", spec);
        const auto an = find_critical_point(spec, profile());
        CHECK_THROWS_AS(build_phi(op, spec, an), Error);
    }
}
