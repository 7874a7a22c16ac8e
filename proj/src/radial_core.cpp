#include "gpspike/radial_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gpspike/errors.hpp"

namespace gpspike {

namespace {

constexpr int kSubsteps = 10;
constexpr double kTwoPi = 6.283185307179586476925286766559;
// Bracket trajectories are averaged until they separate by this relative amount.
constexpr double kSplitTol = 1e-8;

enum class Shot { Overshoot, Undershoot, Undecided };

struct State {
    double w, v;
};

State rhs(double r, const State& s) {
    return {s.v, -s.v / r + s.w - s.w * s.w * s.w};
}

State rk4(double r, const State& s, double h) {
    const State k1 = rhs(r, s);
    const State k2 = rhs(r + 0.5 * h, {s.w + 0.5 * h * k1.w, s.v + 0.5 * h * k1.v});
    const State k3 = rhs(r + 0.5 * h, {s.w + 0.5 * h * k2.w, s.v + 0.5 * h * k2.v});
    const State k4 = rhs(r + h, {s.w + h * k3.w, s.v + h * k3.v});
    return {s.w + h / 6.0 * (k1.w + 2 * k2.w + 2 * k3.w + k4.w),
            s.v + h / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v)};
}

// Integrates from the origin, recording node values until the trajectory is classified.
Shot shoot(double w0, const RadialGrid& grid, std::vector<double>* w, std::vector<double>* dw) {
    const double h = grid.step / kSubsteps;
    const double a2 = (w0 - w0 * w0 * w0) / 4.0;
    const double a4 = a2 * (1.0 - 3.0 * w0 * w0) / 16.0;
    // Series step off the removable singularity at r = 0.
    double r = h;
    State s{w0 + a2 * r * r + a4 * r * r * r * r, 2 * a2 * r + 4 * a4 * r * r * r};
    if (w) {
        w->assign(1, w0);
        dw->assign(1, 0.0);
    }
    for (int i = 0; i < grid.count; ++i) {
        const int first = (i == 0) ? 1 : 0;
        for (int k = first; k < kSubsteps; ++k) {
            s = rk4(r, s, h);
            r = (i * kSubsteps + k + 1) * h;
        }
        if (w) {
            w->push_back(s.w);
            dw->push_back(s.v);
        }
        if (s.w < 0.0) return Shot::Overshoot;
        if (s.v > 0.0) return Shot::Undershoot;
    }
    return Shot::Undecided;
}

void hermite5(double t, double h, double f0, double d0, double s0, double f1, double d1, double s1,
              double& value, double& deriv) {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double H1 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double H2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    const double H3 = 0.5 * t3 - t4 + 0.5 * t5;
    const double H4 = -4 * t3 + 7 * t4 - 3 * t5;
    const double H5 = 10 * t3 - 15 * t4 + 6 * t5;
    value = H0 * f0 + H1 * h * d0 + H2 * h * h * s0 + H3 * h * h * s1 + H4 * h * d1 + H5 * f1;
    const double G0 = -30 * t2 + 60 * t3 - 30 * t4;
    const double G1 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
    const double G2 = t - 4.5 * t2 + 6 * t3 - 2.5 * t4;
    const double G3 = 1.5 * t2 - 4 * t3 + 2.5 * t4;
    const double G4 = -12 * t2 + 28 * t3 - 15 * t4;
    const double G5 = 30 * t2 - 60 * t3 + 30 * t4;
    deriv = (G0 * f0 + G1 * h * d0 + G2 * h * h * s0 + G3 * h * h * s1 + G4 * h * d1 + G5 * f1) / h;
}

double ode_second(double r, double w, double dw, double w0) {
    if (r == 0.0) return 0.5 * (w0 - w0 * w0 * w0);
    return -dw / r + w - w * w * w;
}

}  // namespace

std::vector<double> simpson_weights(int n, double h) {
    if (n < 2 || n % 2 != 0) throw Error(ErrorKind::InputError, "Simpson rule needs an even interval count");
    std::vector<double> wt(n + 1);
    for (int i = 0; i <= n; ++i) wt[i] = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    for (double& x : wt) x *= h / 3.0;
    return wt;
}

double radial_integral(const TownesProfile& townes, const std::vector<double>& f) {
    const auto wt = simpson_weights(townes.grid.count, townes.grid.step);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += wt[i] * townes.r[i] * f[i];
    return kTwoPi * s;
}

void TownesProfile::eval(double radius, double& value, double& deriv) const {
    radius = std::abs(radius);
    const int n = grid.count;
    if (radius >= r[n]) {
        value = 0.0;
        deriv = 0.0;
        return;
    }
    const int i = std::min(n - 1, static_cast<int>(radius / grid.step));
    const double t = (radius - r[i]) / grid.step;
    hermite5(t, grid.step, w[i], dw[i], ode_second(r[i], w[i], dw[i], w0), w[i + 1], dw[i + 1],
             ode_second(r[i + 1], w[i + 1], dw[i + 1], w0), value, deriv);
}

double TownesProfile::value(double radius) const {
    double v, d;
    eval(radius, v, d);
    return v;
}

double TownesProfile::deriv(double radius) const {
    double v, d;
    eval(radius, v, d);
    return d;
}

double TownesProfile::second(double radius) const {
    double v, d;
    eval(radius, v, d);
    return ode_second(radius, v, d, w0);
}

void TownesProfile::finalize() {
    const int n = grid.count;
    std::vector<double> f2(n + 1), f4(n + 1), g2(n + 1), m2(n + 1);
    for (int i = 0; i <= n; ++i) {
        f2[i] = w[i] * w[i];
        f4[i] = f2[i] * f2[i];
        g2[i] = dw[i] * dw[i];
        m2[i] = r[i] * r[i] * f2[i];
    }
    moments.w2 = radial_integral(*this, f2);
    moments.w4 = radial_integral(*this, f4);
    moments.grad2 = radial_integral(*this, g2);
    moments.r2w2 = radial_integral(*this, m2);
    a_star = moments.w2;

    ode_residual = 0.0;
    const double h = grid.step;
    // Sixth-order differences of w'; lower orders are truncation-limited near 1e-8.
    for (int i = 3; i <= n - 3; ++i) {
        const double d2 = (45 * (dw[i + 1] - dw[i - 1]) - 9 * (dw[i + 2] - dw[i - 2]) + (dw[i + 3] - dw[i - 3])) / (60 * h);
        const double res = d2 + dw[i] / r[i] - w[i] + w[i] * w[i] * w[i];
        ode_residual = std::max(ode_residual, std::abs(res));
    }
}

TownesProfile solve_townes(const RadialGrid& grid, const TownesOptions& opts) {
    if (!(opts.shoot_tol > 0.0) || !(opts.ode_tol > 0.0) || !(opts.tail_tol > 0.0))
        throw Error(ErrorKind::InputError, "tolerances must be positive");
    if (grid.radius() < 15.0) throw Error(ErrorKind::InputError, "radial grid must reach R >= 15");
    if (grid.count % 2 != 0) throw Error(ErrorKind::InputError, "radial node count must be even");

    double lo = 1.5, hi = 3.0;
    if (shoot(lo, grid, nullptr, nullptr) != Shot::Undershoot || shoot(hi, grid, nullptr, nullptr) != Shot::Overshoot)
        throw Error(ErrorKind::NoBracket, "initial shooting bracket [1.5, 3] does not separate the regimes");
    // Bisect down to adjacent doubles; shoot_tol is the largest acceptable width.
    for (;;) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const Shot s = shoot(mid, grid, nullptr, nullptr);
        if (s == Shot::Overshoot) hi = mid;
        else if (s == Shot::Undershoot) lo = mid;
        else {
            lo = hi = mid;
            break;
        }
    }
    if (hi - lo > opts.shoot_tol)
        throw Error(ErrorKind::NoConvergence, "shooting bracket did not shrink below shoot_tol");

    std::vector<double> wl, dl, wh, dh;
    shoot(lo, grid, &wl, &dl);
    shoot(hi, grid, &wh, &dh);

    TownesProfile t;
    t.grid = grid;
    t.w0 = 0.5 * (lo + hi);
    t.shoot_width = hi - lo;
    const int n = grid.count;
    t.r.resize(n + 1);
    t.w.resize(n + 1);
    t.dw.resize(n + 1);
    for (int i = 0; i <= n; ++i) t.r[i] = i * grid.step;

    // Trust the averaged bracket until the two trajectories separate, then attach the
    // linear far-field tail c K0(r), which the cubic term perturbs only at O(w^3).
    const int common = static_cast<int>(std::min(wl.size(), wh.size()));
    int split = common - 1;
    for (int i = 0; i < common; ++i) {
        const double avg = 0.5 * (wl[i] + wh[i]);
        if (std::abs(wl[i] - wh[i]) > kSplitTol * std::abs(avg)) {
            split = i - 1;
            break;
        }
    }
    // The last recorded node of a classified trajectory is already past the event.
    split = std::min(split, common - 2);
    for (int i = 0; i <= split; ++i) {
        t.w[i] = 0.5 * (wl[i] + wh[i]);
        t.dw[i] = 0.5 * (dl[i] + dh[i]);
    }
    if (split < n) {
        const double rm = t.r[split];
        const double c = t.w[split] / std::cyl_bessel_k(0.0, rm);
        for (int i = split + 1; i <= n; ++i) {
            t.w[i] = c * std::cyl_bessel_k(0.0, t.r[i]);
            t.dw[i] = -c * std::cyl_bessel_k(1.0, t.r[i]);
        }
    }

    for (int i = 0; i < n; ++i)
        if (!(t.w[i + 1] < t.w[i]) || !(t.w[i + 1] > 0.0))
            throw Error(ErrorKind::NoConvergence, "profile is not positive and strictly decreasing");
    if (std::abs(t.w[n]) >= opts.tail_tol)
        throw Error(ErrorKind::TailNotDecayed, "|w(R)| = " + std::to_string(t.w[n]));

    t.finalize();
    if (t.ode_residual > opts.ode_tol)
        throw Error(ErrorKind::NoConvergence, "ODE residual " + std::to_string(t.ode_residual) + " above ode_tol");
    return t;
}

double gn_ratio(const Field2D& u, const TownesProfile& townes) {
    const double mass = dot(u, u);
    if (!(mass > 0.0)) throw Error(ErrorKind::ZeroField, "field has zero L2 norm");
    const Field2D u2 = multiply(u, u);
    const double quartic = dot(u2, u2);
    const Field2D gx = gradient(u, 0), gy = gradient(u, 1);
    const double grad = dot(gx, gx) + dot(gy, gy);
    return townes.a_star * quartic / (2.0 * grad * mass);
}

IdentityReport radial_identity_report(const TownesProfile& townes) {
    const int n = townes.grid.count;
    const auto wt = simpson_weights(n, townes.grid.step);
    double r1w2 = 0, r3dw2 = 0, r3w2 = 0, r3w4 = 0;
    for (int i = 0; i <= n; ++i) {
        const double r = townes.r[i], w2 = townes.w[i] * townes.w[i];
        r1w2 += wt[i] * r * w2;
        r3dw2 += wt[i] * r * r * r * townes.dw[i] * townes.dw[i];
        r3w2 += wt[i] * r * r * r * w2;
        r3w4 += wt[i] * r * r * r * w2 * w2;
    }
    IdentityReport rep;
    rep.rho1 = (r3dw2 - (2 * r3w2 - r3w4)) / r1w2;
    rep.rho2 = (r3dw2 - (2 * r1w2 - r3w2 + r3w4)) / r1w2;
    rep.rho3 = (2 * r1w2 - 3 * r3w2 + 2 * r3w4) / r1w2;
    const auto& m = townes.moments;
    rep.grad_vs_mass = (m.grad2 - m.w2) / m.w2;
    rep.mass_vs_quartic = (m.w2 - 0.5 * m.w4) / m.w2;
    return rep;
}

Field2D townes_field(const TownesProfile& townes, const CartesianGrid2D& grid) {
    return sample(grid, [&](double x, double y) { return townes.value(std::hypot(x, y)); });
}

Field2D townes_partial(const TownesProfile& townes, const CartesianGrid2D& grid, int axis) {
    return sample(grid, [&](double x, double y) {
        const double r = std::hypot(x, y);
        if (r == 0.0) return 0.0;
        return townes.deriv(r) * (axis == 0 ? x : y) / r;
    });
}

void save_profile(const std::string& path, const TownesProfile& townes) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InputError, "cannot write " + path);
    out << std::setprecision(17);
    out << "# townes dr=" << townes.grid.step << " R=" << townes.grid.radius() << " w0=" << townes.w0 << "\n";
    for (std::size_t i = 0; i < townes.r.size(); ++i)
        out << townes.r[i] << " " << townes.w[i] << " " << townes.dw[i] << "\n";
}

TownesProfile load_profile(const std::string& path, const RadialGrid& expected) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InputError, "cannot read " + path);
    std::string header;
    std::getline(in, header);
    double dr = 0, R = 0, w0 = 0;
    if (std::sscanf(header.c_str(), "# townes dr=%lf R=%lf w0=%lf", &dr, &R, &w0) != 3)
        throw Error(ErrorKind::InputError, "malformed profile header: " + header);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    if (!close(dr, expected.step) || !close(R, expected.radius()))
        throw Error(ErrorKind::InputError, "profile cache grid does not match the requested grid");

    TownesProfile t;
    t.grid = expected;
    t.w0 = w0;
    double r, w, d;
    while (in >> r >> w >> d) {
        t.r.push_back(r);
        t.w.push_back(w);
        t.dw.push_back(d);
    }
    if (static_cast<int>(t.r.size()) != expected.count + 1)
        throw Error(ErrorKind::InputError, "profile cache has the wrong number of rows");
    t.finalize();
    return t;
}

}  // namespace gpspike
