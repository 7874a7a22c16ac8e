#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "gpspike/radial_core.hpp"

namespace gpspike {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

// Trigonometric interpolant of uniformly sampled angular data h0(theta).
class AngularProfile {
public:
    AngularProfile() = default;
    explicit AngularProfile(std::vector<double> samples);

    static AngularProfile preset(const std::string& name, int samples = 256);

    double value(double theta) const;
    double deriv(double theta) const;
    bool empty() const { return samples_.empty(); }
    // h0(theta + pi) == h0(theta): only even harmonics present.
    bool is_even(double tol = 1e-12) const;
    double min_value() const;
    const std::vector<double>& samples() const { return samples_; }

private:
    std::vector<double> samples_;
    std::vector<int> modes_;  // harmonics with non-negligible coefficients
    std::vector<double> cos_coef_, sin_coef_;
};

// Leading Taylor data of the envelope g: D^alpha g(0) for alpha = (m-k, k), k = 0..m.
struct EnvelopeTaylor {
    static constexpr int kInfinite = -1;
    int m = kInfinite;
    std::vector<double> coeffs;

    bool infinite() const { return m == kInfinite; }
    // sum_{|alpha|=m} x^alpha / alpha! D^alpha g(0)
    double term(double x, double y) const;
};

// V = g h with h(x) = |x|^p [1 + delta h0(theta)].
struct PotentialSpec {
    double p = 2.0;
    double delta = 0.0;
    AngularProfile h0;
    double g0 = 1.0;
    EnvelopeTaylor envelope;
    std::function<double(double, double)> envelope_eval;

    double h(double x, double y) const;
    Vec2 grad_h(double x, double y) const;
    double g(double x, double y) const;
    Vec2 grad_g(double x, double y) const;
    double V(double x, double y) const { return g(x, y) * h(x, y); }
    Vec2 grad_V(double x, double y) const;
    bool h_even() const { return delta == 0.0 || h0.empty() || h0.is_even(); }

    void validate() const;
};

PotentialSpec harmonic_spec(double p);
// h = |x|^p [1 + delta cos theta], the asymmetric example trap.
PotentialSpec cosine_spec(double p, double delta);

struct PotentialAnalysis {
    Vec2 y0{0.0, 0.0};
    double H0 = 0.0;
    Mat2 hessH{};
    Vec2 gradH{0.0, 0.0};
    double lambda = 0.0;
    double lambda_pow = 0.0;  // lambda^{2+p}, formed without powering lambda
    bool nondegenerate = true;
    int iterations = 0;
};

struct CriticalPointOptions {
    double grad_tol = 1e-12;
    double nd_tol = 1e-8;
    int max_iter = 50;
    int angles = 128;
};

double eval_H(const PotentialSpec& spec, const TownesProfile& townes, const Vec2& y, int angles = 128);
Vec2 eval_grad_H(const PotentialSpec& spec, const TownesProfile& townes, const Vec2& y, int angles = 128);
Mat2 eval_hess_H(const PotentialSpec& spec, const TownesProfile& townes, const Vec2& y, int angles = 128);

PotentialAnalysis find_critical_point(const PotentialSpec& spec, const TownesProfile& townes,
                                      const CriticalPointOptions& opts = {});

// <d_j w, h(. + y) w> for j = 1, 2; equals -grad H(y) / 2.
Vec2 check_kernel_orthogonality(const PotentialSpec& spec, const PotentialAnalysis& analysis,
                                const TownesProfile& townes, int angles = 128);
Vec2 kernel_projection_at(const PotentialSpec& spec, const Vec2& y, const TownesProfile& townes, int angles = 128);

// Parses "one", "cos", "sin", "cos+sin" or an inline comma separated sample list.
AngularProfile parse_h0(const std::string& text);
// Parses "const:<c>" or "taylor:m=<m>,coeffs=[c0,c1,...]" (g(0) = 1 for the latter).
void parse_envelope(const std::string& text, PotentialSpec& spec);

}  // namespace gpspike
