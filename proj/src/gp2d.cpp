#include "gpspike/gp2d.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>

#include "json.hpp"

#include "gpspike/errors.hpp"
#include "minres.hpp"

namespace gpspike {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
using detail::Vec;
using detail::vdot;

// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// Real-to-complex transforms on a fixed periodic grid.
class Spectral {
public:
    explicit Spectral(const PeriodicGrid& g) : n_(g.n), nh_(g.n / 2 + 1) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        real_ = fftw_alloc_real(g.size());
        spec_ = fftw_alloc_complex(static_cast<std::size_t>(n_) * nh_);
        fwd_ = fftw_plan_dft_r2c_2d(n_, n_, real_, spec_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(n_, n_, spec_, real_, FFTW_ESTIMATE);
        const double dk = kPi / g.half_width;
        kx_.resize(n_);
        ky_.resize(nh_);
        for (int i = 0; i < n_; ++i) kx_[i] = dk * (i <= n_ / 2 ? i : i - n_);
        for (int j = 0; j < nh_; ++j) ky_[j] = dk * j;
        k2_.resize(static_cast<std::size_t>(n_) * nh_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < nh_; ++j) k2_[static_cast<std::size_t>(i) * nh_ + j] = kx_[i] * kx_[i] + ky_[j] * ky_[j];
    }
    ~Spectral() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(spec_);
    }
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    // out = F^{-1}[ m(k) F[in] ] for a real multiplier m.
    template <class Mult>
    void filter(const Vec& in, Vec& out, Mult&& m) {
        std::copy(in.begin(), in.end(), real_);
        fftw_execute(fwd_);
        const double norm = 1.0 / (static_cast<double>(n_) * n_);
        for (std::size_t k = 0; k < k2_.size(); ++k) {
            const double f = m(k) * norm;
            spec_[k][0] *= f;
            spec_[k][1] *= f;
        }
        fftw_execute(bwd_);
        out.assign(real_, real_ + in.size());
    }

    void neg_laplacian(const Vec& in, Vec& out) {
        filter(in, out, [&](std::size_t k) { return k2_[k]; });
    }
    void shifted_inverse(const Vec& in, Vec& out, double s) {
        filter(in, out, [&](std::size_t k) { return 1.0 / (k2_[k] + s); });
    }
    void derivative(const Vec& in, Vec& out, int axis) {
        std::copy(in.begin(), in.end(), real_);
        fftw_execute(fwd_);
        const double norm = 1.0 / (static_cast<double>(n_) * n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < nh_; ++j) {
                auto& c = spec_[static_cast<std::size_t>(i) * nh_ + j];
                double k = axis == 0 ? kx_[i] : ky_[j];
                if ((axis == 0 && i == n_ / 2) || (axis == 1 && j == n_ / 2)) k = 0.0;  // Nyquist
                const double re = c[0], im = c[1];
                c[0] = -k * im * norm;
                c[1] = k * re * norm;
            }
        fftw_execute(bwd_);
        out.assign(real_, real_ + in.size());
    }

private:
    int n_, nh_;
    double* real_;
    fftw_complex* spec_;
    fftw_plan fwd_, bwd_;
    std::vector<double> kx_, ky_, k2_;
};

double max_abs(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct Evaluation {
    double energy = 0.0, mu = 0.0, quartic = 0.0;
    Vec hu, r;
};

class GpProblem {
public:
    GpProblem(const PeriodicGrid& g, Vec V, double a) : grid(g), spectral(g), V(std::move(V)), a(a), h2(g.step() * g.step()) {}

    void normalize(Vec& u) const {
        const double s = 1.0 / std::sqrt(h2 * vdot(u, u));
        for (double& x : u) x *= s;
    }

    double energy(const Vec& u) {
        spectral.neg_laplacian(u, tmp);
        double e = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double u2 = u[k] * u[k];
            e += u[k] * tmp[k] + V[k] * u2 - 0.5 * a * u2 * u2;
        }
        return e * h2;
    }

    Evaluation evaluate(const Vec& u) {
        Evaluation ev;
        spectral.neg_laplacian(u, ev.hu);
        double kin = 0.0, pot = 0.0, q = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double u2 = u[k] * u[k];
            kin += u[k] * ev.hu[k];
            pot += V[k] * u2;
            q += u2 * u2;
            ev.hu[k] += (V[k] - a * u2) * u[k];
        }
        ev.quartic = q * h2;
        ev.energy = (kin + pot) * h2 - 0.5 * a * ev.quartic;
        ev.mu = ev.energy - 0.5 * a * ev.quartic;
        ev.r.resize(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) ev.r[k] = ev.hu[k] - ev.mu * u[k];
        return ev;
    }

    PeriodicGrid grid;
    Spectral spectral;
    Vec V;
    double a;
    double h2;
    Vec tmp;
};

double el_measure(const Evaluation& ev) { return max_abs(ev.r) / std::max(std::abs(ev.mu), 1e-300); }

}  // namespace

double bilinear(const PeriodicGrid& grid, const std::vector<double>& f, double x, double y) {
    const double h = grid.step();
    const double u = x / h + grid.n / 2, v = y / h + grid.n / 2;
    const int i0 = static_cast<int>(std::floor(u)), j0 = static_cast<int>(std::floor(v));
    const double tx = u - i0, ty = v - j0;
    auto at = [&](int i, int j) {
        i = ((i % grid.n) + grid.n) % grid.n;
        j = ((j % grid.n) + grid.n) % grid.n;
        return f[grid.index(i, j)];
    };
    return (1 - tx) * (1 - ty) * at(i0, j0) + tx * (1 - ty) * at(i0 + 1, j0) + (1 - tx) * ty * at(i0, j0 + 1) +
           tx * ty * at(i0 + 1, j0 + 1);
}

std::vector<double> spectral_derivative(const PeriodicGrid& grid, const std::vector<double>& f, int axis) {
    Spectral sp(grid);
    Vec out;
    sp.derivative(f, out, axis);
    return out;
}

Vec2 locate_maximum(const PeriodicGrid& grid, const std::vector<double>& u) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < u.size(); ++k)
        if (u[k] > u[best]) best = k;  // strict: ties keep the smallest index
    const int n = grid.n, i = static_cast<int>(best / n), j = static_cast<int>(best % n);
    auto at = [&](int di, int dj) { return u[grid.index((i + di + n) % n, (j + dj + n) % n)]; };
    const double f0 = at(0, 0);
    const double gx = 0.5 * (at(1, 0) - at(-1, 0)), gy = 0.5 * (at(0, 1) - at(0, -1));
    const double hxx = at(1, 0) - 2 * f0 + at(-1, 0), hyy = at(0, 1) - 2 * f0 + at(0, -1);
    const double hxy = 0.25 * (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1));
    const double det = hxx * hyy - hxy * hxy;
    double dx = 0.0, dy = 0.0;
    if (det > 0.0 && hxx < 0.0) {
        dx = -(hyy * gx - hxy * gy) / det;
        dy = -(hxx * gy - hxy * gx) / det;
        dx = std::clamp(dx, -1.0, 1.0);
        dy = std::clamp(dy, -1.0, 1.0);
    }
    return {grid.coord(i) + dx * grid.step(), grid.coord(j) + dy * grid.step()};
}

int count_local_maxima(const PeriodicGrid& grid, const std::vector<double>& u, double rel_floor) {
    const int n = grid.n;
    const double floor = rel_floor * max_abs(u);
    int count = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double c = u[grid.index(i, j)];
            if (c < floor) continue;
            bool is_max = true;
            for (int di = -1; di <= 1 && is_max; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    if (u[grid.index((i + di + n) % n, (j + dj + n) % n)] >= c) {
                        is_max = false;
                        break;
                    }
                }
            count += is_max;
        }
    return count;
}

GroundState2D minimize(const PotentialSpec& spec, const TownesProfile& townes, const PotentialAnalysis& an, double a,
                       const PeriodicGrid& grid, const MinimizeOptions& opts) {
    spec.validate();
    const double a_star = townes.a_star;
    if (!(a >= 0.0)) throw Error(ErrorKind::InputError, "interaction strength must be non-negative");
    if (a >= a_star * (1.0 - opts.collapse_margin))
        throw Error(ErrorKind::Collapse, "a = " + std::to_string(a) + " is at or beyond the critical strength");
    if (grid.n < 8 || grid.n % 2 != 0) throw Error(ErrorKind::InputError, "periodic grid size must be even");
    const ScaleParameters scale = ScaleParameters::make(a, a_star, spec.p);
    const double width = scale.eps / an.lambda;
    if (width / grid.step() < opts.min_cells)
        throw Error(ErrorKind::GridTooCoarse, "spike width spans " + std::to_string(width / grid.step()) +
                                                  " cells, need " + std::to_string(opts.min_cells));

    Vec V(grid.size());
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) {
            const double v = spec.V(grid.coord(i), grid.coord(j));
            if (!std::isfinite(v) || v < -1e-12) throw Error(ErrorKind::InputError, "trap must be finite and non-negative");
            V[grid.index(i, j)] = v;
        }
    GpProblem prob(grid, std::move(V), a);

    Vec u(grid.size());
    if (opts.initial) {
        if (opts.initial->size() != grid.size()) throw Error(ErrorKind::InputError, "initial field has wrong size");
        u = *opts.initial;
    } else {
        const Vec2 c{width * an.y0[0], width * an.y0[1]};
        for (int i = 0; i < grid.n; ++i)
            for (int j = 0; j < grid.n; ++j)
                u[grid.index(i, j)] = townes.value(std::hypot(grid.coord(i) - c[0], grid.coord(j) - c[1]) / width);
    }
    if (max_abs(u) == 0.0) throw Error(ErrorKind::ZeroField, "initial field vanishes");
    prob.normalize(u);

    GroundState2D st;
    st.grid = grid;
    st.a = a;
    st.scale = scale;

    // Stage 1: preconditioned projected gradient flow with Armijo steps.
    const double s_flow = 1.0 / (width * width);
    double tau = 1.0;
    Vec g, trial(u.size());
    Evaluation ev = prob.evaluate(u);
    int it = 0;
    for (; it < opts.max_flow; ++it) {
        if (max_abs(ev.r) < opts.flow_exit * std::abs(ev.mu)) break;
        prob.spectral.shifted_inverse(ev.r, g, s_flow);
        const double descent = prob.h2 * vdot(ev.r, g);
        for (;;) {
            for (std::size_t k = 0; k < u.size(); ++k) trial[k] = u[k] - tau * g[k];
            prob.normalize(trial);
            if (prob.energy(trial) <= ev.energy - 1e-4 * tau * descent) break;
            tau *= 0.5;
            if (tau < 1e-12) throw Error(ErrorKind::NoConvergence, "gradient flow step collapsed");
        }
        u.swap(trial);
        tau = std::min(1.0, 1.5 * tau);
        ev = prob.evaluate(u);
        if (max_abs(u) * max_abs(u) * prob.h2 > 0.5)
            throw Error(ErrorKind::Collapse, "mass concentrated in a single cell during the flow");
    }
    if (it == opts.max_flow) throw Error(ErrorKind::NoConvergence, "gradient flow did not reach the Newton basin");
    st.flow_iters = it;

    // Stage 2: Newton on (u, mu) with the symmetric bordered Jacobian, dmu = h^2 t.
    const std::size_t m = u.size();
    int k = 0;
    for (; k < opts.max_newton; ++k) {
        if (el_measure(ev) < opts.newton_tol) break;
        const double s_pre = std::max(1.0, -ev.mu);
        Vec pu;
        prob.spectral.shifted_inverse(u, pu, s_pre);
        const double schur = prob.h2 * prob.h2 * vdot(u, pu);
        Vec Av;
        auto A = [&](const Vec& x, Vec& y) {
            Vec top(x.begin(), x.begin() + m);
            prob.spectral.neg_laplacian(top, Av);
            y.assign(m + 1, 0.0);
            double border = 0.0;
            for (std::size_t q = 0; q < m; ++q) {
                y[q] = Av[q] + (prob.V[q] - ev.mu - 3.0 * a * u[q] * u[q]) * x[q] - prob.h2 * x[m] * u[q];
                border += u[q] * x[q];
            }
            y[m] = -prob.h2 * border;
        };
        Vec pre;
        auto M = [&](const Vec& x, Vec& y) {
            Vec top(x.begin(), x.begin() + m);
            prob.spectral.shifted_inverse(top, pre, s_pre);
            y.assign(m + 1, 0.0);
            std::copy(pre.begin(), pre.end(), y.begin());
            y[m] = x[m] / schur;
        };
        Vec b(m + 1), x;
        for (std::size_t q = 0; q < m; ++q) b[q] = -ev.r[q];
        b[m] = -0.5 * (1.0 - prob.h2 * vdot(u, u));
        detail::minres(A, M, b, x, opts.minres_tol, opts.max_minres);
        for (std::size_t q = 0; q < m; ++q) u[q] += x[q];
        prob.normalize(u);
        ev = prob.evaluate(u);
    }
    st.newton_iters = k;
    st.iters = st.flow_iters + st.newton_iters;
    st.el_residual = el_measure(ev);
    if (st.el_residual > opts.el_tol)
        throw Error(ErrorKind::NoConvergence, "Euler-Lagrange residual " + std::to_string(st.el_residual));

    st.u = std::move(u);
    st.energy = ev.energy;
    st.quartic = ev.quartic;
    st.mu = ev.energy - 0.5 * a * ev.quartic;
    st.mu_rayleigh = prob.h2 * vdot(ev.hu, st.u);
    st.x_max = locate_maximum(grid, st.u);
    st.local_maxima = count_local_maxima(grid, st.u);
    return st;
}

double extract_mu(const GroundState2D& state) { return state.energy - 0.5 * state.a * state.quartic; }

PohozaevResult pohozaev_residual(const GroundState2D& st, const PotentialSpec& spec, double radius) {
    const auto& g = st.grid;
    const Vec2 c = st.x_max;
    const double L = g.half_width;
    if (!(radius > 0.0) || std::abs(c[0]) + radius > L - 2 * g.step() || std::abs(c[1]) + radius > L - 2 * g.step())
        throw Error(ErrorKind::BallOutsideGrid, "Pohozaev ball leaves the computational box");
    const Vec ux = spectral_derivative(g, st.u, 0), uy = spectral_derivative(g, st.u, 1);
    const double mu = st.mu, a = st.a;

    PohozaevResult res;
    double scale = 0.0;
    // Boundary terms on the circle, trapezoid in angle.
    const int nb = 1024;
    double flux_virial = 0.0;
    for (int k = 0; k < nb; ++k) {
        const double t = 2.0 * kPi * k / nb, nx = std::cos(t), ny = std::sin(t);
        const double x = c[0] + radius * nx, y = c[1] + radius * ny;
        const double u = bilinear(g, st.u, x, y), gx = bilinear(g, ux, x, y), gy = bilinear(g, uy, x, y);
        const double V = spec.V(x, y), dn = gx * nx + gy * ny, g2 = gx * gx + gy * gy, u2 = u * u;
        const double ds = radius * 2.0 * kPi / nb;
        const double common = g2 + V * u2 - mu * u2 - 0.5 * a * u2 * u2;
        res.boundary[0] += ds * (-2.0 * dn * gx + common * nx);
        res.boundary[1] += ds * (-2.0 * dn * gy + common * ny);
        // z = radius * nu on the circle.
        const double virial = -dn * radius * dn + 0.5 * radius * g2 + 0.5 * (V - mu) * u2 * radius -
                              0.25 * a * u2 * u2 * radius;
        flux_virial += ds * virial;
        scale += ds * (2.0 * std::abs(dn) * std::sqrt(g2) + std::abs(common) + radius * (g2 + std::abs(V - mu) * u2));
    }
    // Area terms in polar coordinates about the centre: Simpson in radius, trapezoid in angle.
    const int nr = 256, nt = 256;
    const double dr = radius / nr;
    double area_virial = 0.0;
    for (int i = 0; i <= nr; ++i) {
        const double rho = i * dr, wr = (i == 0 || i == nr) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        if (rho == 0.0) continue;
        for (int k = 0; k < nt; ++k) {
            const double t = 2.0 * kPi * k / nt;
            const double zx = rho * std::cos(t), zy = rho * std::sin(t);
            const double x = c[0] + zx, y = c[1] + zy;
            const double u = bilinear(g, st.u, x, y), u2 = u * u;
            const Vec2 dV = spec.grad_V(x, y);
            const double wgt = wr * dr / 3.0 * rho * 2.0 * kPi / nt;
            res.area[0] += wgt * dV[0] * u2;
            res.area[1] += wgt * dV[1] * u2;
            const double V = spec.V(x, y);
            area_virial += wgt * (-0.5 * u2 * (2.0 * (V - mu) + zx * dV[0] + zy * dV[1]) + 0.5 * a * u2 * u2);
            scale += wgt * (std::abs(dV[0]) + std::abs(dV[1])) * u2;
        }
    }
    res.mismatch = {res.area[0] - res.boundary[0], res.area[1] - res.boundary[1]};
    res.virial = flux_virial + area_virial;
    res.scale = scale;
    return res;
}

UniquenessResult uniqueness_probe(const PotentialSpec& spec, const TownesProfile& townes, const PotentialAnalysis& an,
                                  double a, const PeriodicGrid& grid, int n_starts, std::uint64_t seed,
                                  const MinimizeOptions& opts) {
    if (n_starts < 5) throw Error(ErrorKind::InputError, "uniqueness probe needs at least five starts");
    if (a < 0.9 * townes.a_star) throw Error(ErrorKind::InputError, "uniqueness probe runs in the window a >= 0.9 a*");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> centre(-1.0, 1.0), width(0.3, 1.0);
    std::vector<Vec> states;
    UniquenessResult out;
    for (int s = 0; s < n_starts; ++s) {
        const double cx = centre(rng), cy = centre(rng), wd = width(rng);
        Vec init(grid.size());
        for (int i = 0; i < grid.n; ++i)
            for (int j = 0; j < grid.n; ++j) {
                const double dx = grid.coord(i) - cx, dy = grid.coord(j) - cy;
                init[grid.index(i, j)] = std::exp(-(dx * dx + dy * dy) / (2.0 * wd * wd));
            }
        MinimizeOptions o = opts;
        o.initial = &init;
        auto st = minimize(spec, townes, an, a, grid, o);
        out.energies.push_back(st.energy);
        states.push_back(std::move(st.u));
    }
    for (std::size_t p = 0; p < states.size(); ++p)
        for (std::size_t q = p + 1; q < states.size(); ++q) {
            double d = 0.0;
            for (std::size_t k = 0; k < states[p].size(); ++k) d = std::max(d, std::abs(states[p][k] - states[q][k]));
            out.max_distance = std::max(out.max_distance, d);
        }
    out.starts = n_starts;
    return out;
}

std::string sweep_record_json(const GroundState2D& st) {
    nlohmann::json j;
    j["a"] = st.a;
    j["eps"] = st.scale.eps;
    j["energy"] = st.energy;
    j["mu"] = st.mu;
    j["x_max"] = {st.x_max[0], st.x_max[1]};
    j["iters"] = st.iters;
    j["el_residual"] = st.el_residual;
    return j.dump();
}

void write_state_csv(const std::string& path, const GroundState2D& st) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::InputError, "cannot write " + path);
    f << "# field=u a=" << std::setprecision(12) << st.a << " n=" << st.grid.n << " L=" << st.grid.half_width << "\n";
    f << "x y u\n" << std::setprecision(10);
    for (int i = 0; i < st.grid.n; ++i)
        for (int j = 0; j < st.grid.n; ++j)
            f << st.grid.coord(i) << ' ' << st.grid.coord(j) << ' ' << st.u[st.grid.index(i, j)] << '\n';
}

}  // namespace gpspike
