#include "gpspike/field2d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "gpspike/errors.hpp"

namespace gpspike {

CartesianGrid2D CartesianGrid2D::make(double half_width, double step) {
    if (!(step > 0.0) || !(half_width > 2 * step))
        throw Error(ErrorKind::InputError, "grid needs step > 0 and half width > 2 steps");
    CartesianGrid2D g;
    g.step = step;
    g.half_count = static_cast<int>(std::lround(half_width / step));
    return g;
}

Field2D sample(const CartesianGrid2D& grid, const std::function<double(double, double)>& f) {
    Field2D out(grid);
    const int n = grid.side();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = f(grid.coord(i), grid.coord(j));
    return out;
}

double integrate(const Field2D& f) {
    double s = 0.0;
    for (double v : f.values) s += v;
    return s * f.grid.step * f.grid.step;
}

double dot(const Field2D& a, const Field2D& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) s += a.values[k] * b.values[k];
    return s * a.grid.step * a.grid.step;
}

double l2_norm(const Field2D& f) { return std::sqrt(dot(f, f)); }

double max_abs(const Field2D& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}

Field2D combine(double ca, const Field2D& a, double cb, const Field2D& b) {
    Field2D out(a.grid);
    for (std::size_t k = 0; k < a.values.size(); ++k) out.values[k] = ca * a.values[k] + cb * b.values[k];
    return out;
}

Field2D multiply(const Field2D& a, const Field2D& b) {
    Field2D out(a.grid);
    for (std::size_t k = 0; k < a.values.size(); ++k) out.values[k] = a.values[k] * b.values[k];
    return out;
}

namespace {

double value_or_zero(const Field2D& f, int i, int j) {
    const int n = f.grid.side();
    if (i < 0 || j < 0 || i >= n || j >= n) return 0.0;
    return f.at(i, j);
}

double d1_4th(const Field2D& f, int i, int j, int axis) {
    const int di = axis == 0 ? 1 : 0, dj = axis == 0 ? 0 : 1;
    const double fp1 = value_or_zero(f, i + di, j + dj), fm1 = value_or_zero(f, i - di, j - dj);
    const double fp2 = value_or_zero(f, i + 2 * di, j + 2 * dj), fm2 = value_or_zero(f, i - 2 * di, j - 2 * dj);
    return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * f.grid.step);
}

void cubic_weights(double t, double w[4]) {
    // nodes at -1, 0, 1, 2
    w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
}

}  // namespace

Field2D gradient(const Field2D& f, int axis) {
    Field2D out(f.grid);
    const int n = f.grid.side();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = d1_4th(f, i, j, axis);
    return out;
}

std::array<double, 2> gradient_at_origin(const Field2D& f) {
    const int c = f.grid.half_count;
    return {d1_4th(f, c, c, 0), d1_4th(f, c, c, 1)};
}

double interpolate(const Field2D& f, double x, double y) {
    const double h = f.grid.step;
    const double u = x / h + f.grid.half_count, v = y / h + f.grid.half_count;
    const int i0 = static_cast<int>(std::floor(u)), j0 = static_cast<int>(std::floor(v));
    double wx[4], wy[4];
    cubic_weights(u - i0, wx);
    cubic_weights(v - j0, wy);
    double s = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) s += wx[a] * wy[b] * value_or_zero(f, i0 - 1 + a, j0 - 1 + b);
    return s;
}

double reflection_asymmetry(const Field2D& f) {
    const int n = f.grid.side();
    double m = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m = std::max(m, std::abs(f.at(i, j) - f.at(n - 1 - i, n - 1 - j)));
    return m;
}

double radial_asymmetry(const Field2D& f) {
    const int n = f.grid.side(), c = f.grid.half_count;
    const double h = f.grid.step, rmax = f.grid.half_width() - 2 * h;
    auto axis = [&](int k) { return f.at(c + std::abs(k), c); };
    double m = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double r = std::hypot(f.grid.coord(i), f.grid.coord(j));
            if (r > rmax) continue;
            const double u = r / h;
            const int k0 = static_cast<int>(std::floor(u));
            double w[4];
            cubic_weights(u - k0, w);
            double s = 0.0;
            for (int a = 0; a < 4; ++a) s += w[a] * axis(k0 - 1 + a);
            m = std::max(m, std::abs(f.at(i, j) - s));
        }
    return m;
}

void write_field_csv(const std::string& path, const Field2D& f, const std::string& name, double p) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InputError, "cannot write " + path);
    out << "# field=" << name << " p=" << p << " dx=" << f.grid.step << " R=" << f.grid.half_width() << "\n";
    out << std::setprecision(17);
    const int n = f.grid.side();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out << f.grid.coord(i) << " " << f.grid.coord(j) << " " << f.at(i, j) << "\n";
}

}  // namespace gpspike
