#pragma once

#include <string>

#include "gpspike/linearized.hpp"

namespace gpspike {

// Expansion branches, keyed by the envelope order m relative to 2+p.
enum class CaseTag {
    Base,           // m > 2+p (including a constant envelope)
    OddLow,         // m <= 2+p, m odd
    EvenLowSZero,   // m < 2+p, m even, S = 0
    EvenLowS,       // m < 2+p, m even, S != 0
    EvenCritical,   // m = 2+p, m even
};

const char* case_name(CaseTag tag);
// m < 0 means a constant envelope.
CaseTag classify_case(double p, int m, bool s_is_zero);

struct AsymptoticConstants {
    double p = 2.0;
    int m = EnvelopeTaylor::kInfinite;
    double lambda = 0.0;
    double lambda_pow = 0.0;
    double c_star = 0.0;
    double c1_star = 0.0;
    double c2_star = 0.0;
    double s_val = 0.0;
    double i_val = 0.0;
    double ii_val = 0.0;
    Vec2 i5_val{0.0, 0.0};
    double w_phi2 = 0.0;       // 2 int w phi from the solved correction
    double s_relation = 0.0;   // -(m+p) S / (2 lambda^{2+p+m})
    CaseTag case_tag = CaseTag::Base;
    bool c_star_small = false;
};

struct ScaleParameters {
    double a = 0.0;
    double a_star = 0.0;
    double p = 2.0;
    double alpha = 0.0;
    double eps = 0.0;
    double beta = 0.0;  // only meaningful after with_mu

    static ScaleParameters make(double a, double a_star, double p);
    // beta = 1 + mu eps^2 / lambda^2
    ScaleParameters with_mu(double mu, double lambda) const;
};

enum class Order { Leading, First, Second };
const char* order_name(Order o);

struct ExpansionPrediction {
    Field2D u_pred;
    double mu_pred = 0.0;
    double e_pred = 0.0;
    Vec2 x_pred{0.0, 0.0};
    Order order = Order::Leading;
    double norm_before = 0.0;  // L2 norm prior to the projection onto the unit sphere
};

// sum_{|alpha|=m} int (x^alpha/alpha!) D^alpha g(0) h w^2 by separable polar quadrature.
double compute_S(const PotentialSpec& spec, const TownesProfile& townes);

AsymptoticConstants compute_constants(const CorrectionSet& corr, const LinearOperator& op,
                                      const PotentialAnalysis& an, const PotentialSpec& spec);

double predict_beta(const AsymptoticConstants& c, const ScaleParameters& s);
// Throws WrongCase unless the envelope is constant.
double predict_mu(const AsymptoticConstants& c, const PotentialAnalysis& an, const ScaleParameters& s);
double predict_energy(const PotentialAnalysis& an, const ScaleParameters& s);

// Correction to w in the rescaled frame y = lambda (x - x_k) / eps, truncated at the given order.
Field2D predict_rescaled_correction(const AsymptoticConstants& c, const CorrectionSet& corr,
                                    const ScaleParameters& s, Order order);
Vec2 predict_location(const AsymptoticConstants& c, const CorrectionSet& corr, const PotentialAnalysis& an,
                      const ScaleParameters& s, Order order);
ExpansionPrediction predict_profile(const AsymptoticConstants& c, const CorrectionSet& corr,
                                    const PotentialAnalysis& an, const TownesProfile& townes,
                                    const ScaleParameters& s, Order order, const CartesianGrid2D& target);

void write_constants_csv(const std::string& path, const AsymptoticConstants& c);

}  // namespace gpspike
