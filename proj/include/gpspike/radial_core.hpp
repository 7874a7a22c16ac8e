#pragma once

#include <string>
#include <vector>

#include "gpspike/field2d.hpp"

namespace gpspike {

struct RadialGrid {
    double step = 0.005;
    int count = 4000;
    double radius() const { return step * count; }
};

// Plane integrals 2*pi * int_0^R r (.) dr of the profile.
struct TownesMoments {
    double w2 = 0.0;
    double w4 = 0.0;
    double grad2 = 0.0;
    double r2w2 = 0.0;
};

struct TownesOptions {
    double shoot_tol = 1e-12;
    double ode_tol = 1e-8;
    double tail_tol = 1e-8;
};

// Radial solution of  w'' + w'/r - w + w^3 = 0,  w'(0) = 0,  w -> 0.
class TownesProfile {
public:
    RadialGrid grid;
    std::vector<double> r, w, dw;
    double w0 = 0.0;
    double a_star = 0.0;
    TownesMoments moments;
    double ode_residual = 0.0;
    double shoot_width = 0.0;

    // Quintic Hermite interpolation from (w, w', w''); zero beyond R.
    void eval(double radius, double& value, double& deriv) const;
    double value(double radius) const;
    double deriv(double radius) const;
    double second(double radius) const;

    // Recomputes moments, a_star and the residual from r, w, dw.
    void finalize();
};

TownesProfile solve_townes(const RadialGrid& grid, const TownesOptions& opts = {});

// a* int u^4 / (2 int |grad u|^2 int u^2); equals 1 at u = w.
double gn_ratio(const Field2D& u, const TownesProfile& townes);

struct IdentityReport {
    double rho1 = 0.0;
    double rho2 = 0.0;
    double rho3 = 0.0;
    double grad_vs_mass = 0.0;  // (int|grad w|^2 - int w^2) / int w^2
    double mass_vs_quartic = 0.0;  // (int w^2 - int w^4 / 2) / int w^2
};

IdentityReport radial_identity_report(const TownesProfile& townes);

// Composite Simpson weights on n+1 uniform nodes (n even).
std::vector<double> simpson_weights(int n, double h);

// Plane integral of a radial quantity sampled on the profile grid.
double radial_integral(const TownesProfile& townes, const std::vector<double>& f);

Field2D townes_field(const TownesProfile& townes, const CartesianGrid2D& grid);
Field2D townes_partial(const TownesProfile& townes, const CartesianGrid2D& grid, int axis);

void save_profile(const std::string& path, const TownesProfile& townes);
TownesProfile load_profile(const std::string& path, const RadialGrid& expected);

}  // namespace gpspike
