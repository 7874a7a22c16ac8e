#include "gpspike/linearized.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

#include "gpspike/errors.hpp"
#include "minres.hpp"

namespace gpspike {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

using Vec = std::vector<double>;
using detail::minres;
using detail::vdot;

Field2D field_from(const CartesianGrid2D& g, const std::function<double(double, double)>& f) { return sample(g, f); }

void zero_boundary(Field2D& f) {
    const int n = f.grid.side();
    for (int k = 0; k < n; ++k) f.at(0, k) = f.at(n - 1, k) = f.at(k, 0) = f.at(k, n - 1) = 0.0;
}

Vec2 kernel_projection(const LinearOperator& op, const Field2D& f) {
    const double nf = l2_norm(f);
    Vec2 out{0.0, 0.0};
    if (nf == 0.0) return out;
    for (int j = 0; j < 2; ++j) out[j] = dot(f, op.dw(j)) / (nf * l2_norm(op.dw(j)));
    return out;
}

Field2D shifted_h(const LinearOperator& op, const PotentialSpec& spec, const Vec2& y) {
    return field_from(op.grid(), [&](double x1, double x2) { return spec.h(x1 + y[0], x2 + y[1]); });
}

Field2D directional_h(const LinearOperator& op, const PotentialSpec& spec, const Vec2& y, const Vec2& dir) {
    return field_from(op.grid(), [&](double x1, double x2) {
        const Vec2 g = spec.grad_h(x1 + y[0], x2 + y[1]);
        return dir[0] * g[0] + dir[1] * g[1];
    });
}

Field2D solve_checked(const LinearOperator& op, const Field2D& f, const char* name, Vec2* shift) {
    SolveReport rep;
    try {
        Field2D out = solve_mod_kernel(op, f, &rep);
        if (shift) *shift = rep.shift;
        return out;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NotSolvable)
            throw Error(ErrorKind::NotSolvable, std::string(name) + " forcing: " + e.what());
        throw;
    }
}

}  // namespace

struct LinearOperator::Fft {
    int n = 0;
    double* buf = nullptr;
    fftw_plan plan = nullptr;
    std::vector<double> inv_symbol;

    explicit Fft(int size) : n(size) {
        buf = fftw_alloc_real(static_cast<std::size_t>(n) * n);
        plan = fftw_plan_r2r_2d(n, n, buf, buf, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
    }
    ~Fft() {
        fftw_destroy_plan(plan);
        fftw_free(buf);
    }
};

LinearOperator::LinearOperator(const TownesProfile& townes, const CartesianGrid2D& grid, const LinearOptions& opts)
    : townes_(&townes), grid_(grid), opts_(opts) {
    if (grid.step > 0.1 + 1e-12) throw Error(ErrorKind::InputError, "linearised grid needs step <= 0.1");
    if (grid.half_width() > townes.grid.radius() + grid.step)
        throw Error(ErrorKind::InputError, "linearised grid extends past the radial profile");
    w_ = townes_field(townes, grid);
    dw_[0] = townes_partial(townes, grid, 0);
    dw_[1] = townes_partial(townes, grid, 1);
    for (auto* f : {&w_, &dw_[0], &dw_[1]}) zero_boundary(*f);
    q_ = Field2D(grid);
    for (std::size_t k = 0; k < q_.values.size(); ++k) q_.values[k] = 1.0 - 3.0 * w_.values[k] * w_.values[k];

    const int n = grid.side() - 2;
    fft_ = std::make_unique<Fft>(n);
    const double h2 = grid.step * grid.step;
    std::vector<double> sym(n);
    for (int k = 0; k < n; ++k) {
        const double t = kPi * (k + 1) / (n + 1);
        sym[k] = (2.5 - (8.0 / 3.0) * std::cos(t) + (1.0 / 6.0) * std::cos(2.0 * t)) / h2;
    }
    const double norm = 1.0 / (4.0 * (n + 1.0) * (n + 1.0));
    fft_->inv_symbol.resize(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) fft_->inv_symbol[static_cast<std::size_t>(a) * n + b] = norm / (sym[a] + sym[b] + 1.0);
}

LinearOperator::~LinearOperator() = default;
LinearOperator::LinearOperator(LinearOperator&&) noexcept = default;
LinearOperator& LinearOperator::operator=(LinearOperator&&) noexcept = default;

Field2D LinearOperator::apply(const Field2D& f) const {
    const int side = grid_.side(), last = side - 1;
    const double c = 1.0 / (12.0 * grid_.step * grid_.step);
    // Odd reflection through the boundary ring supplies the second neighbour.
    auto at = [&](int i, int j) {
        double s = 1.0;
        if (i < 0) { i = -i; s = -s; }
        if (i > last) { i = 2 * last - i; s = -s; }
        if (j < 0) { j = -j; s = -s; }
        if (j > last) { j = 2 * last - j; s = -s; }
        if (i == 0 || j == 0 || i == last || j == last) return 0.0;
        return s * f.at(i, j);
    };
    Field2D out(grid_);
    for (int i = 1; i < last; ++i)
        for (int j = 1; j < last; ++j) {
            const double u = f.at(i, j);
            const double dxx = -at(i - 2, j) + 16.0 * at(i - 1, j) - 30.0 * u + 16.0 * at(i + 1, j) - at(i + 2, j);
            const double dyy = -at(i, j - 2) + 16.0 * at(i, j - 1) - 30.0 * u + 16.0 * at(i, j + 1) - at(i, j + 2);
            out.at(i, j) = -c * (dxx + dyy) + q_.at(i, j) * u;
        }
    return out;
}

void LinearOperator::precondition(const double* in, double* out) const {
    const int side = grid_.side(), n = side - 2;
    double* buf = fft_->buf;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) buf[static_cast<std::size_t>(i) * n + j] = in[grid_.index(i + 1, j + 1)];
    fftw_execute(fft_->plan);
    for (std::size_t k = 0; k < fft_->inv_symbol.size(); ++k) buf[k] *= fft_->inv_symbol[k];
    fftw_execute(fft_->plan);
    std::fill(out, out + grid_.size(), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out[grid_.index(i + 1, j + 1)] = buf[static_cast<std::size_t>(i) * n + j];
}

Field2D solve_mod_kernel(const LinearOperator& op, const Field2D& f_in, SolveReport* report) {
    const auto& grid = op.grid();
    const auto& opts = op.options();
    Field2D f = f_in;
    zero_boundary(f);
    SolveReport rep;
    rep.projection = kernel_projection(op, f);
    for (int j = 0; j < 2; ++j)
        if (std::abs(rep.projection[j]) >= opts.orth_tol)
            throw Error(ErrorKind::NotSolvable, "forcing has relative kernel component " +
                                                     std::to_string(rep.projection[j]) + " along d_" +
                                                     std::to_string(j + 1) + " w");
    const std::size_t m = grid.size();
    Field2D out(grid);
    if (max_abs(f) == 0.0) {
        if (report) *report = rep;
        return out;
    }

    // Bordered system [L K; K^T 0] with unit columns K = d_j w / |d_j w|.
    std::array<Vec, 2> K;
    for (int j = 0; j < 2; ++j) {
        K[j] = op.dw(j).values;
        const double nk = std::sqrt(vdot(K[j], K[j]));
        for (double& v : K[j]) v /= nk;
    }
    std::array<Vec, 2> PK{Vec(m), Vec(m)};
    for (int j = 0; j < 2; ++j) op.precondition(K[j].data(), PK[j].data());
    Mat2 S{};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) S[a][b] = vdot(K[a], PK[b]);
    const double sdet = S[0][0] * S[1][1] - S[0][1] * S[1][0];

    Field2D tmp(grid);
    auto A = [&](const Vec& x, Vec& y) {
        std::copy(x.begin(), x.begin() + m, tmp.values.begin());
        const Field2D Lx = op.apply(tmp);
        y.assign(m + 2, 0.0);
        for (std::size_t k = 0; k < m; ++k) y[k] = Lx.values[k] + x[m] * K[0][k] + x[m + 1] * K[1][k];
        y[m] = vdot(K[0], tmp.values);
        y[m + 1] = vdot(K[1], tmp.values);
    };
    auto M = [&](const Vec& x, Vec& y) {
        y.assign(m + 2, 0.0);
        op.precondition(x.data(), y.data());
        y[m] = (S[1][1] * x[m] - S[0][1] * x[m + 1]) / sdet;
        y[m + 1] = (S[0][0] * x[m + 1] - S[1][0] * x[m]) / sdet;
    };
    Vec b(m + 2, 0.0), x;
    std::copy(f.values.begin(), f.values.end(), b.begin());
    rep.iterations = minres(A, M, b, x, opts.solver_tol, opts.max_iter);
    std::copy(x.begin(), x.begin() + m, out.values.begin());

    // Kernel shift so that the discrete gradient vanishes at the origin.
    const auto g = gradient_at_origin(out);
    const auto g1 = gradient_at_origin(op.dw(0)), g2 = gradient_at_origin(op.dw(1));
    rep.shift_det = g1[0] * g2[1] - g2[0] * g1[1];
    if (std::abs(rep.shift_det) < 1e-12) throw Error(ErrorKind::SingularSystem, "kernel shift system is singular");
    rep.shift = {-(g[0] * g2[1] - g2[0] * g[1]) / rep.shift_det, -(g1[0] * g[1] - g[0] * g1[1]) / rep.shift_det};
    for (std::size_t k = 0; k < m; ++k)
        out.values[k] += rep.shift[0] * op.dw(0).values[k] + rep.shift[1] * op.dw(1).values[k];

    const Field2D res = combine(1.0, op.apply(out), -1.0, f);
    rep.residual = max_abs(res);
    if (rep.residual > opts.lin_tol * std::max(1.0, max_abs(f)))
        throw Error(ErrorKind::NoConvergence, "linear residual " + std::to_string(rep.residual) + " exceeds lin_tol");
    if (report) *report = rep;
    return out;
}

std::vector<double> solve_radial(const TownesProfile& townes, const std::vector<double>& f) {
    const int n = townes.grid.count;
    const double dr = townes.grid.step, h2 = dr * dr;
    if (static_cast<int>(f.size()) != n + 1) throw Error(ErrorKind::InputError, "radial forcing has wrong length");
    // Tridiagonal rows for nodes 0..n-1; psi_n = 0.
    std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0), rhs(f.begin(), f.begin() + n);
    di[0] = 4.0 / h2 + 1.0 - 3.0 * townes.w[0] * townes.w[0];
    up[0] = -4.0 / h2;
    for (int i = 1; i < n; ++i) {
        const double r = townes.r[i];
        lo[i] = -1.0 / h2 + 1.0 / (2.0 * r * dr);
        di[i] = 2.0 / h2 + 1.0 - 3.0 * townes.w[i] * townes.w[i];
        up[i] = -1.0 / h2 - 1.0 / (2.0 * r * dr);
    }
    for (int i = 1; i < n; ++i) {
        const double m = lo[i] / di[i - 1];
        di[i] -= m * up[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> psi(n + 1, 0.0);
    psi[n - 1] = rhs[n - 1] / di[n - 1];
    for (int i = n - 2; i >= 0; --i) psi[i] = (rhs[i] - up[i] * psi[i + 1]) / di[i];
    return psi;
}

Field2D lift_radial(const TownesProfile& townes, const std::vector<double>& v, const CartesianGrid2D& grid) {
    const double dr = townes.grid.step;
    const int n = townes.grid.count;
    auto node = [&](int i) { return i < 0 ? v[-i] : (i > n ? 0.0 : v[i]); };  // even about r = 0
    return sample(grid, [&](double x, double y) {
        const double u = std::hypot(x, y) / dr;
        const int i0 = static_cast<int>(std::floor(u));
        if (i0 >= n) return 0.0;
        const double t = u - i0;
        const double w0 = -t * (t - 1.0) * (t - 2.0) / 6.0, w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        const double w2 = -(t + 1.0) * t * (t - 2.0) / 2.0, w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        return w0 * node(i0 - 1) + w1 * node(i0) + w2 * node(i0 + 1) + w3 * node(i0 + 2);
    });
}

Field2D build_psi1(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an,
                   SolveReport* report) {
    const auto& t = op.townes();
    const Field2D h = shifted_h(op, spec, an.y0);
    Field2D f(op.grid());
    const double c1 = -2.0 / t.moments.w4, c2 = -2.0 / (spec.p * an.H0);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        const double w = op.w().values[k];
        f.values[k] = c1 * w * w * w + c2 * h.values[k] * w;
    }
    SolveReport rep;
    Field2D psi;
    try {
        psi = solve_mod_kernel(op, f, &rep);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NotSolvable)
            throw Error(ErrorKind::NotSolvable, std::string("psi1 forcing (is y0 critical?): ") + e.what());
        throw;
    }
    if (report) *report = rep;
    return psi;
}

Field2D build_psi2(const LinearOperator& op) {
    Field2D out(op.grid());
    const auto& g = op.grid();
    for (int i = 0; i < g.side(); ++i)
        for (int j = 0; j < g.side(); ++j) {
            const std::size_t k = g.index(i, j);
            const double x = g.coord(i), y = g.coord(j);
            out.values[k] = -0.5 * (op.w().values[k] + x * op.dw(0).values[k] + y * op.dw(1).values[k]);
        }
    return out;
}

YSupSolution solve_y_sup(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an,
                         const Field2D& psi1) {
    const auto& t = op.townes();
    YSupSolution out;
    const Field2D h = shifted_h(op, spec, an.y0);
    const double lam_p1 = an.lambda_pow / an.lambda;
    const double g0 = spec.g0;
    for (int i = 0; i < 2; ++i) {
        const Field2D dh = directional_h(op, spec, an.y0, i == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0});
        for (int j = 0; j < 2; ++j) out.matrix[j][i] = g0 * dot(op.dw(j), multiply(dh, op.w()));
    }
    for (int j = 0; j < 2; ++j) {
        double s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t k = 0; k < psi1.values.size(); ++k) {
            const double w = op.w().values[k], p1 = psi1.values[k], d = op.dw(j).values[k];
            s1 += d * w * w * p1;
            s2 += d * h.values[k] * p1;
            s3 += d * w * p1 * p1;
        }
        const double dA = op.grid().step * op.grid().step;
        out.i5[j] = dA * ((3.0 / t.a_star) * s1 + g0 * s2 / an.lambda_pow - 3.0 * s3);
    }
    const Mat2& M = out.matrix;
    const double det = M[0][0] * M[1][1] - M[0][1] * M[1][0];
    const double scale = std::max(std::abs(M[0][0]) + std::abs(M[0][1]), std::abs(M[1][0]) + std::abs(M[1][1]));
    if (!(std::abs(det) > 1e-10 * scale * scale))
        throw Error(ErrorKind::SingularSystem, "y-sup system is singular");
    const Vec2 rhs{-lam_p1 * out.i5[0], -lam_p1 * out.i5[1]};
    out.y_sup = {(M[1][1] * rhs[0] - M[0][1] * rhs[1]) / det, (M[0][0] * rhs[1] - M[1][0] * rhs[0]) / det};
    // Exact zeros for even h keep downstream symmetry checks clean.
    if (spec.h_even()) out.y_sup = {0.0, 0.0};
    return out;
}

Psi345 build_psi345(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an,
                    const Field2D& psi1, const Field2D& psi2, const Vec2& y_sup) {
    const auto& t = op.townes();
    const Field2D h = shifted_h(op, spec, an.y0);
    const Field2D hy = directional_h(op, spec, an.y0, y_sup);
    const Field2D h0dir = directional_h(op, spec, an.y0, an.y0);
    const double lam_p1 = an.lambda_pow / an.lambda, g0 = spec.g0;
    Field2D f3(op.grid()), f4(op.grid()), f5(op.grid());
    for (std::size_t k = 0; k < f3.values.size(); ++k) {
        const double w = op.w().values[k], p1 = psi1.values[k], p2 = psi2.values[k];
        const double pot = 3.0 * w * w / t.a_star + g0 * h.values[k] / an.lambda_pow;
        f3.values[k] = 3.0 * w * p1 * p1 - pot * p1 - g0 * w / lam_p1 * hy.values[k];
        f4.values[k] = 3.0 * w * p2 * p2 + p2;
        f5.values[k] = 6.0 * w * p1 * p2 + p1 - pot * p2 - g0 * w / (2.0 * an.lambda_pow) * h0dir.values[k];
    }
    Psi345 out;
    out.psi3 = solve_checked(op, f3, "psi3", &out.shifts[0]);
    out.psi4 = solve_checked(op, f4, "psi4", &out.shifts[1]);
    out.psi5 = solve_checked(op, f5, "psi5", &out.shifts[2]);

    // Radial cross-check for psi4: both forcing pieces are radial.
    std::vector<double> rf(t.r.size());
    for (std::size_t i = 0; i < t.r.size(); ++i) {
        const double p2 = -0.5 * (t.w[i] + t.r[i] * t.dw[i]);
        rf[i] = 3.0 * t.w[i] * p2 * p2 + p2;
    }
    const Field2D lifted = lift_radial(t, solve_radial(t, rf), op.grid());
    out.radial_agreement = max_abs(combine(1.0, out.psi4, -1.0, lifted));
    return out;
}

PhiSolution build_phi(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an) {
    PhiSolution out;
    out.phi = Field2D(op.grid());
    out.forcing = Field2D(op.grid());
    if (spec.envelope.infinite()) return out;
    if (!spec.h_even()) throw Error(ErrorKind::InputError, "envelope correction requires an even h");
    const int m = spec.envelope.m;
    const double lam_m = std::pow(an.lambda, m);
    Field2D taylor(op.grid());
    const Field2D h = shifted_h(op, spec, {0.0, 0.0});
    const auto& g = op.grid();
    for (int i = 0; i < g.side(); ++i)
        for (int j = 0; j < g.side(); ++j) {
            const std::size_t k = g.index(i, j);
            taylor.values[k] = spec.envelope.term(g.coord(i), g.coord(j)) * h.values[k] * op.w().values[k] / lam_m;
        }
    Field2D extra(op.grid());
    if (m % 2 == 1) {
        Mat2 M{};
        Vec2 rhs{};
        std::array<Field2D, 2> dh{directional_h(op, spec, {0.0, 0.0}, {1.0, 0.0}),
                                  directional_h(op, spec, {0.0, 0.0}, {0.0, 1.0})};
        for (int j = 0; j < 2; ++j) {
            for (int i = 0; i < 2; ++i) M[j][i] = spec.g0 * dot(op.dw(j), multiply(dh[i], op.w()));
            rhs[j] = -dot(op.dw(j), taylor);
        }
        const double det = M[0][0] * M[1][1] - M[0][1] * M[1][0];
        const double scale = std::abs(M[0][0]) + std::abs(M[1][1]) + std::abs(M[0][1]) + std::abs(M[1][0]);
        if (!(std::abs(det) > 1e-10 * scale * scale)) throw Error(ErrorKind::SingularSystem, "x0 system is singular");
        out.x0 = {(M[1][1] * rhs[0] - M[0][1] * rhs[1]) / det, (M[0][0] * rhs[1] - M[1][0] * rhs[0]) / det};
        for (std::size_t k = 0; k < extra.values.size(); ++k)
            extra.values[k] = spec.g0 * (out.x0[0] * dh[0].values[k] + out.x0[1] * dh[1].values[k]) * op.w().values[k];
    }
    for (std::size_t k = 0; k < out.forcing.values.size(); ++k)
        out.forcing.values[k] = -(extra.values[k] + taylor.values[k]) / an.lambda_pow;
    out.phi = solve_checked(op, out.forcing, "phi", nullptr);
    return out;
}

CorrectionSet build_corrections(const LinearOperator& op, const PotentialSpec& spec, const PotentialAnalysis& an) {
    CorrectionSet c;
    SolveReport rep;
    c.psi1 = build_psi1(op, spec, an, &rep);
    c.normalization_shift[0] = rep.shift;
    c.psi2 = build_psi2(op);
    const auto ys = solve_y_sup(op, spec, an, c.psi1);
    c.y_sup = ys.y_sup;
    c.i5 = ys.i5;
    auto p345 = build_psi345(op, spec, an, c.psi1, c.psi2, c.y_sup);
    c.psi3 = std::move(p345.psi3);
    c.psi4 = std::move(p345.psi4);
    c.psi5 = std::move(p345.psi5);
    c.psi4_radial_agreement = p345.radial_agreement;
    for (int k = 0; k < 3; ++k) c.normalization_shift[k + 2] = p345.shifts[k];
    if (!spec.envelope.infinite()) {
        auto ph = build_phi(op, spec, an);
        c.phi = std::move(ph.phi);
        c.x0 = ph.x0;
        c.has_phi = true;
    } else {
        c.phi = Field2D(op.grid());
    }
    return c;
}

void export_corrections(const std::string& dir, const CorrectionSet& c, double p) {
    std::filesystem::create_directories(dir);
    const std::pair<const char*, const Field2D*> items[] = {{"psi1", &c.psi1}, {"psi2", &c.psi2}, {"psi3", &c.psi3},
                                                            {"psi4", &c.psi4}, {"psi5", &c.psi5}, {"phi", &c.phi}};
    for (const auto& [name, f] : items) {
        if (std::string(name) == "phi" && !c.has_phi) continue;
        write_field_csv((std::filesystem::path(dir) / (std::string(name) + ".csv")).string(), *f, name, p);
    }
}

}  // namespace gpspike
