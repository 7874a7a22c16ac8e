#include "gpspike/potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gpspike/errors.hpp"

namespace gpspike {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

double ipow(double x, int n) {
    double r = 1.0;
    for (int k = 0; k < n; ++k) r *= x;
    return r;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorKind::InputError, "not a number: '" + item + "'");
        }
    }
    return out;
}

// Integration of F(z) w^2(|z - y|) type integrands in polar coordinates about z = 0, where
// h is smooth along rays; the radial factor is smooth because w is.
template <class Fn>
void polar_sweep(const TownesProfile& townes, const Vec2& y, int angles, Fn&& fn) {
    const double dr = townes.grid.step;
    int n = static_cast<int>(std::ceil((townes.grid.radius() + std::hypot(y[0], y[1])) / dr));
    n += n % 2;
    const auto wt = simpson_weights(n, dr);
    const double dphi = 2.0 * kPi / angles;
    for (int k = 0; k < angles; ++k) {
        const double c = std::cos(k * dphi), s = std::sin(k * dphi);
        for (int i = 1; i <= n; ++i) {
            const double rho = i * dr;
            fn(rho * c, rho * s, wt[i] * rho * dphi);
        }
    }
}

}  // namespace

AngularProfile::AngularProfile(std::vector<double> samples) : samples_(std::move(samples)) {
    const int n = static_cast<int>(samples_.size());
    if (n == 0) return;
    if (n % 2 != 0) throw Error(ErrorKind::InputError, "angular sample count must be even");
    double scale = 0.0;
    for (double v : samples_) scale = std::max(scale, std::abs(v));
    for (int k = 0; k <= n / 2; ++k) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < n; ++j) {
            const double t = 2.0 * kPi * j / n;
            a += samples_[j] * std::cos(k * t);
            b += samples_[j] * std::sin(k * t);
        }
        const double norm = (k == 0 || k == n / 2) ? 1.0 / n : 2.0 / n;
        a *= norm;
        b = (k == n / 2) ? 0.0 : b * norm;
        if (std::abs(a) > 1e-14 * std::max(scale, 1e-300) || std::abs(b) > 1e-14 * std::max(scale, 1e-300)) {
            modes_.push_back(k);
            cos_coef_.push_back(std::abs(a) > 1e-14 * scale ? a : 0.0);
            sin_coef_.push_back(std::abs(b) > 1e-14 * scale ? b : 0.0);
        }
    }
}

AngularProfile AngularProfile::preset(const std::string& name, int samples) {
    std::vector<double> s(samples);
    for (int j = 0; j < samples; ++j) {
        const double t = 2.0 * kPi * j / samples;
        if (name == "one") s[j] = 1.0;
        else if (name == "cos") s[j] = std::cos(t);
        else if (name == "sin") s[j] = std::sin(t);
        else if (name == "cos+sin") s[j] = std::cos(t) + std::sin(t);
        else throw Error(ErrorKind::InputError, "unknown h0 preset '" + name + "'");
    }
    return AngularProfile(std::move(s));
}

double AngularProfile::value(double theta) const {
    double v = 0.0;
    for (std::size_t q = 0; q < modes_.size(); ++q) {
        const int k = modes_[q];
        v += cos_coef_[q] * std::cos(k * theta) + sin_coef_[q] * std::sin(k * theta);
    }
    return v;
}

double AngularProfile::deriv(double theta) const {
    double v = 0.0;
    for (std::size_t q = 0; q < modes_.size(); ++q) {
        const int k = modes_[q];
        v += k * (-cos_coef_[q] * std::sin(k * theta) + sin_coef_[q] * std::cos(k * theta));
    }
    return v;
}

bool AngularProfile::is_even(double tol) const {
    const std::size_t n = samples_.size();
    for (std::size_t j = 0; j < n / 2; ++j)
        if (std::abs(samples_[j] - samples_[j + n / 2]) > tol) return false;
    return true;
}

double AngularProfile::min_value() const {
    double m = 1e300;
    for (int j = 0; j < 4096; ++j) m = std::min(m, value(2.0 * kPi * j / 4096));
    return m;
}

double EnvelopeTaylor::term(double x, double y) const {
    if (infinite()) return 0.0;
    double s = 0.0;
    for (int k = 0; k <= m; ++k)
        if (coeffs[k] != 0.0) s += coeffs[k] * ipow(x, m - k) * ipow(y, k) / (factorial(m - k) * factorial(k));
    return s;
}

double PotentialSpec::h(double x, double y) const {
    const double r2 = x * x + y * y;
    if (r2 == 0.0) return 0.0;
    double a = 1.0;
    if (delta != 0.0 && !h0.empty()) a += delta * h0.value(std::atan2(y, x));
    return std::pow(r2, 0.5 * p) * a;
}

Vec2 PotentialSpec::grad_h(double x, double y) const {
    const double r = std::hypot(x, y);
    if (r == 0.0) return {0.0, 0.0};
    double a = 1.0, da = 0.0;
    if (delta != 0.0 && !h0.empty()) {
        const double t = std::atan2(y, x);
        a += delta * h0.value(t);
        da = delta * h0.deriv(t);
    }
    const double rp1 = std::pow(r, p - 1.0);
    const double hr = p * rp1 * a;  // radial derivative
    const double ht = rp1 * da;  // (1/r) angular derivative
    const double c = x / r, s = y / r;
    return {c * hr - s * ht, s * hr + c * ht};
}

double PotentialSpec::g(double x, double y) const {
    if (envelope_eval) return envelope_eval(x, y);
    return g0 + envelope.term(x, y);
}

Vec2 PotentialSpec::grad_g(double x, double y) const {
    if (envelope_eval) {
        const double e = 1e-6;
        return {(envelope_eval(x + e, y) - envelope_eval(x - e, y)) / (2 * e),
                (envelope_eval(x, y + e) - envelope_eval(x, y - e)) / (2 * e)};
    }
    if (envelope.infinite()) return {0.0, 0.0};
    const int m = envelope.m;
    Vec2 d{0.0, 0.0};
    for (int k = 0; k <= m; ++k) {
        const double c = envelope.coeffs[k];
        if (c == 0.0) continue;
        if (m - k >= 1) d[0] += c * ipow(x, m - k - 1) * ipow(y, k) / (factorial(m - k - 1) * factorial(k));
        if (k >= 1) d[1] += c * ipow(x, m - k) * ipow(y, k - 1) / (factorial(m - k) * factorial(k - 1));
    }
    return d;
}

Vec2 PotentialSpec::grad_V(double x, double y) const {
    const double gv = g(x, y), hv = h(x, y);
    const Vec2 dg = grad_g(x, y), dh = grad_h(x, y);
    return {dg[0] * hv + gv * dh[0], dg[1] * hv + gv * dh[1]};
}

void PotentialSpec::validate() const {
    if (!(p >= 2.0)) throw Error(ErrorKind::InputError, "homogeneity degree p must be >= 2");
    if (!(g0 > 0.0)) throw Error(ErrorKind::InputError, "g(0) must be positive");
    if (delta != 0.0 && !h0.empty()) {
        double lo = 1e300;
        for (int j = 0; j < 4096; ++j) lo = std::min(lo, 1.0 + delta * h0.value(2.0 * kPi * j / 4096));
        if (lo < 0.0) throw Error(ErrorKind::InputError, "1 + delta h0 must be non-negative");
    }
    if (!envelope.infinite()) {
        if (envelope.m < 1) throw Error(ErrorKind::InputError, "envelope order must be >= 1");
        if (static_cast<int>(envelope.coeffs.size()) != envelope.m + 1)
            throw Error(ErrorKind::InputError, "envelope needs m+1 Taylor coefficients");
    }
}

PotentialSpec harmonic_spec(double p) {
    PotentialSpec s;
    s.p = p;
    return s;
}

PotentialSpec cosine_spec(double p, double delta) {
    PotentialSpec s;
    s.p = p;
    s.delta = delta;
    s.h0 = AngularProfile::preset("cos");
    return s;
}

double eval_H(const PotentialSpec& spec, const TownesProfile& townes, const Vec2& y, int angles) {
    double sum = 0.0;
    polar_sweep(townes, y, angles, [&](double zx, double zy, double wt) {
        const double w = townes.value(std::hypot(zx - y[0], zy - y[1]));
        sum += wt * spec.h(zx, zy) * w * w;
    });
    return sum;
}

// d/dy_j of w^2(|z - y|) = -2 w w'(rho) (z - y)_j / rho.
Vec2 eval_grad_H(const PotentialSpec& spec, const TownesProfile& townes, const Vec2& y, int angles) {
    Vec2 g{0.0, 0.0};
    polar_sweep(townes, y, angles, [&](double zx, double zy, double wt) {
        const double ex = zx - y[0], ey = zy - y[1], rho = std::hypot(ex, ey);
        if (rho == 0.0) return;
        double w, dw;
        townes.eval(rho, w, dw);
        const double f = -2.0 * w * dw / rho * wt * spec.h(zx, zy);
        g[0] += f * ex;
        g[1] += f * ey;
    });
    return g;
}

Mat2 eval_hess_H(const PotentialSpec& spec, const TownesProfile& townes, const Vec2& y, int angles) {
    Mat2 H{};
    polar_sweep(townes, y, angles, [&](double zx, double zy, double wt) {
        const double ex = zx - y[0], ey = zy - y[1], rho = std::hypot(ex, ey);
        double w, dw;
        townes.eval(rho, w, dw);
        const double d2 = townes.second(rho);
        const double q2 = 2.0 * (dw * dw + w * d2);
        const double q1r = rho > 0.0 ? 2.0 * w * dw / rho : q2;
        const double e[2] = {rho > 0 ? ex / rho : 0.0, rho > 0 ? ey / rho : 0.0};
        const double f = wt * spec.h(zx, zy);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                H[i][j] += f * (q2 * e[i] * e[j] + q1r * ((i == j ? 1.0 : 0.0) - e[i] * e[j]));
    });
    H[0][1] = H[1][0] = 0.5 * (H[0][1] + H[1][0]);
    return H;
}

PotentialAnalysis find_critical_point(const PotentialSpec& spec, const TownesProfile& townes,
                                      const CriticalPointOptions& opts) {
    spec.validate();
    PotentialAnalysis an;
    Vec2 y{0.0, 0.0};
    const double scale = eval_H(spec, townes, y, opts.angles);
    if (!spec.h_even()) {
        bool done = false;
        for (int it = 0; it < opts.max_iter; ++it) {
            an.iterations = it + 1;
            const Vec2 g = eval_grad_H(spec, townes, y, opts.angles);
            if (std::hypot(g[0], g[1]) < opts.grad_tol * scale) {
                done = true;
                break;
            }
            const Mat2 H = eval_hess_H(spec, townes, y, opts.angles);
            const double det = H[0][0] * H[1][1] - H[0][1] * H[1][0];
            Vec2 step;
            if (std::abs(det) > opts.nd_tol * scale * scale) {
                step = {(H[1][1] * g[0] - H[0][1] * g[1]) / det, (H[0][0] * g[1] - H[1][0] * g[0]) / det};
            } else {
                // Armijo-damped steepest descent when the Hessian is near singular.
                const double h0 = eval_H(spec, townes, y, opts.angles), gg = g[0] * g[0] + g[1] * g[1];
                double t = 1.0 / std::max(1e-300, std::sqrt(gg));
                while (t > 1e-16) {
                    const Vec2 trial{y[0] - t * g[0], y[1] - t * g[1]};
                    if (eval_H(spec, townes, trial, opts.angles) <= h0 - 1e-4 * t * gg) break;
                    t *= 0.5;
                }
                step = {t * g[0], t * g[1]};
            }
            y = {y[0] - step[0], y[1] - step[1]};
        }
        if (!done) throw Error(ErrorKind::NoConvergence, "Newton iteration on grad H did not converge");
    }
    an.y0 = y;
    an.H0 = eval_H(spec, townes, y, opts.angles);
    an.gradH = spec.h_even() ? Vec2{0.0, 0.0} : eval_grad_H(spec, townes, y, opts.angles);
    an.hessH = eval_hess_H(spec, townes, y, opts.angles);
    const double det = an.hessH[0][0] * an.hessH[1][1] - an.hessH[0][1] * an.hessH[1][0];
    an.nondegenerate = std::abs(det) > opts.nd_tol * an.H0 * an.H0;
    an.lambda_pow = spec.p * spec.g0 / 2.0 * an.H0;
    an.lambda = std::pow(an.lambda_pow, 1.0 / (2.0 + spec.p));
    return an;
}

Vec2 kernel_projection_at(const PotentialSpec& spec, const Vec2& y, const TownesProfile& townes, int angles) {
    const Vec2 g = eval_grad_H(spec, townes, y, angles);
    return {-0.5 * g[0], -0.5 * g[1]};
}

Vec2 check_kernel_orthogonality(const PotentialSpec& spec, const PotentialAnalysis& analysis,
                                const TownesProfile& townes, int angles) {
    return kernel_projection_at(spec, analysis.y0, townes, angles);
}

AngularProfile parse_h0(const std::string& text) {
    const std::string t = trim(text);
    if (t == "one" || t == "cos" || t == "sin" || t == "cos+sin") return AngularProfile::preset(t);
    auto values = parse_list(t);
    if (values.size() < 2) throw Error(ErrorKind::InputError, "h0 sample list needs at least two values");
    return AngularProfile(std::move(values));
}

void parse_envelope(const std::string& text, PotentialSpec& spec) {
    const std::string t = trim(text);
    if (t.rfind("const:", 0) == 0) {
        const auto v = parse_list(t.substr(6));
        if (v.size() != 1 || !(v[0] > 0.0)) throw Error(ErrorKind::InputError, "const envelope needs one positive value");
        spec.g0 = v[0];
        spec.envelope = EnvelopeTaylor{};
        const double c = v[0];
        spec.envelope_eval = [c](double, double) { return c; };
        return;
    }
    if (t.rfind("taylor:", 0) == 0) {
        const std::string body = t.substr(7);
        const auto mpos = body.find("m="), cpos = body.find("coeffs=[");
        const auto close = body.find(']');
        if (mpos == std::string::npos || cpos == std::string::npos || close == std::string::npos)
            throw Error(ErrorKind::InputError, "taylor envelope needs m=<m>,coeffs=[...]");
        const auto mval = parse_list(body.substr(mpos + 2, body.find(',', mpos) - mpos - 2));
        if (mval.size() != 1 || mval[0] != std::floor(mval[0]))
            throw Error(ErrorKind::InputError, "taylor envelope order must be an integer");
        spec.g0 = 1.0;
        spec.envelope.m = static_cast<int>(mval[0]);
        spec.envelope.coeffs = parse_list(body.substr(cpos + 8, close - cpos - 8));
        spec.envelope_eval = nullptr;
        spec.validate();
        return;
    }
    throw Error(ErrorKind::InputError, "unknown envelope '" + text + "'");
}

}  // namespace gpspike
