#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace gpspike {

// Square lattice [-R, R]^2 with (2n+1)^2 nodes; the origin is node (n, n).
struct CartesianGrid2D {
    int half_count = 0;
    double step = 0.0;

    static CartesianGrid2D make(double half_width, double step);

    double half_width() const { return half_count * step; }
    int side() const { return 2 * half_count + 1; }
    std::size_t size() const { return static_cast<std::size_t>(side()) * side(); }
    double coord(int i) const { return (i - half_count) * step; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * side() + j; }
};

struct Field2D {
    CartesianGrid2D grid;
    std::vector<double> values;

    Field2D() = default;
    explicit Field2D(const CartesianGrid2D& g) : grid(g), values(g.size(), 0.0) {}

    double& at(int i, int j) { return values[grid.index(i, j)]; }
    double at(int i, int j) const { return values[grid.index(i, j)]; }
};

Field2D sample(const CartesianGrid2D& grid, const std::function<double(double, double)>& f);

// Node-sum quadrature; exact for the trapezoid rule since fields vanish on the boundary.
double integrate(const Field2D& f);
double dot(const Field2D& a, const Field2D& b);
double l2_norm(const Field2D& f);
double max_abs(const Field2D& f);

Field2D combine(double ca, const Field2D& a, double cb, const Field2D& b);
Field2D multiply(const Field2D& a, const Field2D& b);

// Fourth-order central differences; one-sided terms use zero outside the box.
Field2D gradient(const Field2D& f, int axis);
std::array<double, 2> gradient_at_origin(const Field2D& f);

// Cubic Lagrange interpolation; zero outside the box.
double interpolate(const Field2D& f, double x, double y);

// Max |f(x) - f(-x)|.
double reflection_asymmetry(const Field2D& f);
// Max deviation from the profile read off the positive x-axis, over |x| <= R - 2dx.
double radial_asymmetry(const Field2D& f);

void write_field_csv(const std::string& path, const Field2D& f, const std::string& name, double p);

}  // namespace gpspike
