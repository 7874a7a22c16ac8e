#include "gpspike/asymptotics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "gpspike/errors.hpp"

namespace gpspike {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

void add_scaled(Field2D& out, double c, const Field2D& f) {
    if (c == 0.0) return;
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += c * f.values[k];
}

}  // namespace

const char* case_name(CaseTag tag) {
    switch (tag) {
        case CaseTag::Base: return "m>2+p";
        case CaseTag::OddLow: return "m<=2+p odd";
        case CaseTag::EvenLowSZero: return "m<2+p even S=0";
        case CaseTag::EvenLowS: return "m<2+p even S!=0";
        case CaseTag::EvenCritical: return "m=2+p even";
    }
    return "?";
}

CaseTag classify_case(double p, int m, bool s_is_zero) {
    if (m < 0 || m > 2.0 + p) return CaseTag::Base;
    if (m % 2 == 1) return CaseTag::OddLow;
    if (m == 2.0 + p) return CaseTag::EvenCritical;
    return s_is_zero ? CaseTag::EvenLowSZero : CaseTag::EvenLowS;
}

const char* order_name(Order o) {
    switch (o) {
        case Order::Leading: return "leading";
        case Order::First: return "+alpha";
        case Order::Second: return "+alpha^2";
    }
    return "?";
}

ScaleParameters ScaleParameters::make(double a, double a_star, double p) {
    if (!(a < a_star)) throw Error(ErrorKind::InputError, "a must be below a*");
    ScaleParameters s;
    s.a = a;
    s.a_star = a_star;
    s.p = p;
    s.alpha = a_star - a;
    s.eps = std::pow(s.alpha, 1.0 / (2.0 + p));
    s.beta = std::numeric_limits<double>::quiet_NaN();
    return s;
}

ScaleParameters ScaleParameters::with_mu(double mu, double lambda) const {
    ScaleParameters s = *this;
    s.beta = 1.0 + mu * eps * eps / (lambda * lambda);
    return s;
}

namespace {

// Separable polar quadrature of T h w^2; with `absolute` the angular factor uses |T h|.
double s_integral(const PotentialSpec& spec, const TownesProfile& townes, bool absolute) {
    const auto& env = spec.envelope;
    if (env.infinite()) return 0.0;
    const int m = env.m;
    std::vector<double> f(townes.r.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = std::pow(townes.r[i], m + spec.p) * townes.w[i] * townes.w[i];
    // radial_integral carries 2 pi; the angular factor below is a plain integral over theta.
    const double radial = radial_integral(townes, f) / (2.0 * kPi);
    const int nt = 1024;
    double s = 0.0;
    for (int k = 0; k <= m; ++k) {
        if (env.coeffs[k] == 0.0) continue;
        double ang = 0.0;
        for (int j = 0; j < nt; ++j) {
            const double t = 2.0 * kPi * j / nt;
            double a = 1.0;
            if (spec.delta != 0.0 && !spec.h0.empty()) a += spec.delta * spec.h0.value(t);
            const double v = std::pow(std::cos(t), m - k) * std::pow(std::sin(t), k) * a;
            ang += absolute ? std::abs(v) : v;
        }
        ang *= 2.0 * kPi / nt;
        const double c = env.coeffs[k] / (factorial(m - k) * factorial(k));
        s += (absolute ? std::abs(c) : c) * ang;
    }
    return s * radial;
}

}  // namespace

double compute_S(const PotentialSpec& spec, const TownesProfile& townes) { return s_integral(spec, townes, false); }

AsymptoticConstants compute_constants(const CorrectionSet& corr, const LinearOperator& op,
                                      const PotentialAnalysis& an, const PotentialSpec& spec) {
    AsymptoticConstants c;
    const double p = spec.p;
    c.p = p;
    c.m = spec.envelope.m;
    c.lambda = an.lambda;
    c.lambda_pow = an.lambda_pow;
    const Field2D& w = op.w();
    c.c_star = 2.0 / (2.0 + p) * (2.0 * dot(w, corr.psi3) + dot(corr.psi1, corr.psi1));
    c.c_star_small = std::abs(c.c_star) < 1e-6;
    c.i_val = 2.0 * dot(w, corr.psi4) + dot(corr.psi2, corr.psi2);
    c.ii_val = 2.0 * dot(w, corr.psi5) + 2.0 * dot(corr.psi1, corr.psi2);
    c.i5_val = corr.i5;
    c.w_phi2 = corr.has_phi ? 2.0 * dot(w, corr.phi) : 0.0;
    c.c2_star = c.c_star + 2.0 / (2.0 + p) * c.w_phi2;
    if (!spec.envelope.infinite()) {
        const int m = spec.envelope.m;
        c.s_val = compute_S(spec, op.townes());
        const double lam_total = an.lambda_pow * std::pow(an.lambda, m);
        c.s_relation = -(m + p) * c.s_val / (2.0 * lam_total);
        c.c1_star = -(m + p) * c.s_val / ((2.0 + p) * lam_total);
        // Zero test relative to the integral of the term-wise absolute values.
        const double scale = s_integral(spec, op.townes(), true) + 1e-300;
        c.case_tag = classify_case(p, m, std::abs(c.s_val) < 1e-9 * scale);
    }
    return c;
}

double predict_beta(const AsymptoticConstants& c, const ScaleParameters& s) {
    switch (c.case_tag) {
        case CaseTag::EvenLowS: return c.c1_star * std::pow(s.eps, c.m);
        case CaseTag::EvenCritical: return c.c2_star * s.alpha;
        default: return c.c_star * s.alpha;
    }
}

double predict_mu(const AsymptoticConstants& c, const PotentialAnalysis& an, const ScaleParameters& s) {
    if (c.m != EnvelopeTaylor::kInfinite)
        throw Error(ErrorKind::WrongCase, std::string("multiplier predictor needs a constant envelope, case ") +
                                              case_name(c.case_tag));
    const double l2 = an.lambda * an.lambda;
    return -l2 / (s.eps * s.eps) + l2 * c.c_star * std::pow(s.eps, s.p);
}

double predict_energy(const PotentialAnalysis& an, const ScaleParameters& s) {
    return an.lambda * an.lambda / s.a_star * (s.p + 2.0) / s.p * std::pow(s.alpha, s.p / (2.0 + s.p));
}

Field2D predict_rescaled_correction(const AsymptoticConstants& c, const CorrectionSet& corr,
                                    const ScaleParameters& s, Order order) {
    Field2D out(corr.psi1.grid);
    if (order == Order::Leading) return out;
    const double a = s.alpha, a2 = a * a;
    const bool needs_phi = c.case_tag != CaseTag::Base && c.case_tag != CaseTag::EvenLowS;
    if (needs_phi && !corr.has_phi) throw Error(ErrorKind::WrongCase, "case requires the envelope correction");
    switch (c.case_tag) {
        case CaseTag::EvenLowS: {
            const double em = std::pow(s.eps, c.m);
            add_scaled(out, c.c1_star * em, corr.psi2);
            add_scaled(out, a, corr.psi1);
            if (order == Order::Second) add_scaled(out, c.c1_star * c.c1_star * em * em, corr.psi4);
            return out;
        }
        case CaseTag::EvenCritical: {
            const double k = c.c2_star;
            add_scaled(out, a, corr.psi1);
            add_scaled(out, a * k, corr.psi2);
            if (order == Order::Second) {
                add_scaled(out, a2, corr.psi3);
                add_scaled(out, a2 * k * k, corr.psi4);
                add_scaled(out, a2 * k, corr.psi5);
                add_scaled(out, a2, corr.phi);
            }
            return out;
        }
        default: {
            const double k = c.c_star;
            add_scaled(out, a, corr.psi1);
            add_scaled(out, a * k, corr.psi2);
            if (needs_phi) add_scaled(out, a * std::pow(s.eps, c.m), corr.phi);
            if (order == Order::Second) {
                add_scaled(out, a2, corr.psi3);
                add_scaled(out, a2 * k * k, corr.psi4);
                add_scaled(out, a2 * k, corr.psi5);
            }
            return out;
        }
    }
}

Vec2 predict_location(const AsymptoticConstants& c, const CorrectionSet& corr, const PotentialAnalysis& an,
                      const ScaleParameters& s, Order order) {
    const double f = s.eps / an.lambda;
    Vec2 y = an.y0;
    if (order != Order::Leading) {
        if (c.case_tag == CaseTag::OddLow) {
            const double em = std::pow(s.eps, c.m);
            y = {y[0] + em * corr.x0[0], y[1] + em * corr.x0[1]};
        } else if (c.case_tag == CaseTag::Base) {
            for (int j = 0; j < 2; ++j) y[j] += s.alpha * (c.c_star * an.y0[j] / 2.0 + an.lambda * corr.y_sup[j]);
        }
    }
    return {f * y[0], f * y[1]};
}

ExpansionPrediction predict_profile(const AsymptoticConstants& c, const CorrectionSet& corr,
                                    const PotentialAnalysis& an, const TownesProfile& townes,
                                    const ScaleParameters& s, Order order, const CartesianGrid2D& target) {
    ExpansionPrediction out;
    out.order = order;
    out.x_pred = predict_location(c, corr, an, s, order);
    out.e_pred = predict_energy(an, s);
    out.mu_pred = c.m == EnvelopeTaylor::kInfinite ? predict_mu(c, an, s) : std::numeric_limits<double>::quiet_NaN();
    const Field2D corr_field = predict_rescaled_correction(c, corr, s, order);
    const double k = an.lambda / s.eps, amp = an.lambda / (std::sqrt(townes.a_star) * s.eps);
    out.u_pred = sample(target, [&](double x, double y) {
        const double zx = k * (x - out.x_pred[0]), zy = k * (y - out.x_pred[1]);
        double v = townes.value(std::hypot(zx, zy));
        if (order != Order::Leading) v += interpolate(corr_field, zx, zy);
        return amp * v;
    });
    out.norm_before = l2_norm(out.u_pred);
    if (out.norm_before > 0.0)
        for (double& v : out.u_pred.values) v /= out.norm_before;
    return out;
}

void write_constants_csv(const std::string& path, const AsymptoticConstants& c) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::InputError, "cannot write " + path);
    f << "p,m,case,lambda,C*,C1*,C2*,S,I,II,I5\n";
    f << std::setprecision(12) << c.p << ',' << (c.m < 0 ? std::string("inf") : std::to_string(c.m)) << ','
      << case_name(c.case_tag) << ',' << c.lambda << ',' << c.c_star << ',' << c.c1_star << ',' << c.c2_star << ','
      << c.s_val << ',' << c.i_val << ',' << c.ii_val << ',' << c.i5_val[0] << '\n';
}

}  // namespace gpspike
