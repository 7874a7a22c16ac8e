#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpspike/errors.hpp"
#include "gpspike/gp2d.hpp"

namespace gpspike {

struct Thresholds {
    double slope_tol = 0.02;
    double prefactor_tol = 0.05;
    double mu_final_tol = 0.05;
    double c_star_tol = 0.15;
    double profile_tol = 0.15;
    double profile_check_ratio = 0.99;  // sweep point where the first-order error is judged
    double order_target = 2.0;
    double order_tol = 0.3;
    double location_tol = 0.05;         // relative to |y0|
    double location_abs_tol = 1e-6;     // in grid steps, used when y0 = 0
    double unique_tol = 1e-6;
    double poho_ratio = 1.8;
};

struct RunConfig {
    RadialGrid radial{0.005, 4000};
    double corr_half_width = 16.0;
    double corr_step = 0.05;
    PeriodicGrid gp{512, 4.0};
    MinimizeOptions minimize;

    // Potential, kept as text so the manifest can echo it.
    double p = 2.0;
    double delta = 0.0;
    std::string h0 = "one";
    std::string g = "const:1";

    std::vector<double> sweep{0.9, 0.97, 0.99, 0.997};  // a / a*
    double coarse_weight = 0.5;                         // applied to the two smallest a in log-log fits

    int uniqueness_starts = 8;
    double uniqueness_ratio = 0.95;
    int uniqueness_n = 256;

    double pohozaev_ratio = 0.97;
    int pohozaev_coarse_n = 256;
    double pohozaev_radius = 3.0;  // in units of eps / lambda

    Thresholds thresholds;
    std::string out_dir = "gpspike_out";
    std::uint64_t seed = 20240607;
    int workers = 0;  // 0 = hardware concurrency

    PotentialSpec potential() const;
    void validate() const;
};

// Line-oriented key = value with [section] headers; unknown keys are hard errors.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
std::string config_summary(const RunConfig& cfg);

// Shared pipeline state; built lazily so each subcommand only pays for what it uses.
class Context {
public:
    explicit Context(RunConfig cfg);
    ~Context();
    Context(const Context&) = delete;
    Context& operator=(const Context&) = delete;

    const RunConfig& config() const { return cfg_; }
    const PotentialSpec& spec() const { return spec_; }
    const TownesProfile& townes();
    const PotentialAnalysis& analysis();
    const LinearOperator& op();
    const CorrectionSet& corrections();
    const AsymptoticConstants& constants();
    // Minimizers for every sweep point, solved on a bounded worker pool.
    const std::vector<GroundState2D>& sweep();

private:
    RunConfig cfg_;
    PotentialSpec spec_;
    std::optional<TownesProfile> townes_;
    std::optional<PotentialAnalysis> an_;
    std::unique_ptr<LinearOperator> op_;
    std::optional<CorrectionSet> corr_;
    std::optional<AsymptoticConstants> constants_;
    std::optional<std::vector<GroundState2D>> sweep_;
};

// Weighted least squares y = c0 + c1 x.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;  // standard error of the slope
    double rms = 0.0;       // weighted rms residual
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& weights);
// Weights 1 except the two smallest x-values by a-ratio ordering, which get `coarse_weight`.
std::vector<double> sweep_weights(const std::vector<double>& ratios, double coarse_weight);

struct Check {
    std::string name;
    double value = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
};

struct ScalingPoint {
    double ratio, alpha, eps, energy, predicted;
};
struct ScalingReport {
    std::vector<ScalingPoint> points;
    std::vector<double> weights;
    LineFit fit;
    double slope_expected = 0.0;
    double prefactor = 0.0;           // weighted geometric mean of e / alpha^{p/(2+p)}
    double prefactor_expected = 0.0;  // lambda^2 (p+2) / (p a*)
    std::vector<Check> checks;
};

struct MuPoint {
    double ratio, alpha, eps, mu, mu_scaled, beta, beta_over_alpha, beta_predicted, mu_predicted;
};
struct MuReport {
    std::vector<MuPoint> points;
    double c0 = 0.0, c1 = 0.0;  // mu ~ c0 / eps^2 + c1 eps^p
    double c0_expected = 0.0, c1_expected = 0.0;
    double c_star = 0.0;
    bool monotone = false;
    std::vector<Check> checks;
};

struct ProfilePoint {
    double ratio, alpha;
    double norm_wk;           // || w_k ||_2 in the rescaled frame
    double err_leading;       // || w_k ||_2 (zero prediction)
    double err_first;         // || w_k - first-order ||_2
    double err_second;        // || w_k - second-order ||_2
    double linf_first;
    double rel_first;         // err_first / norm_wk
};
struct ProfileReport {
    std::vector<ProfilePoint> points;
    LineFit remainder_fit;  // log err_first vs log alpha
    std::vector<Check> checks;
    std::string skipped;    // reason when the study could not run
};

struct LocationPoint {
    double ratio, alpha, eps;
    Vec2 x_max, scaled;  // scaled = lambda x_max / eps
    double error;        // |scaled - y0|
    Vec2 predicted;      // first-order predicted location
};
struct LocationReport {
    std::vector<LocationPoint> points;
    Vec2 y0{0.0, 0.0};
    LineFit rate_fit;  // log error vs log eps
    Vec2 y_sup_empirical{0.0, 0.0};
    Vec2 y_sup_predicted{0.0, 0.0};
    std::vector<Check> checks;
    std::string skipped;
};

struct UniquenessReport {
    UniquenessResult result;
    std::vector<Check> checks;
};

struct PohozaevReport {
    PohozaevResult coarse, fine;
    double ratio = 0.0;
    double radius = 0.0;
    std::vector<Check> checks;
};

ScalingReport run_scaling_study(Context& ctx);
MuReport run_mu_study(Context& ctx);
ProfileReport run_profile_study(Context& ctx);
LocationReport run_location_study(Context& ctx);
UniquenessReport run_uniqueness_study(Context& ctx);
PohozaevReport run_pohozaev_study(Context& ctx);

struct VerificationReport {
    std::optional<ScalingReport> scaling;
    std::optional<MuReport> mu;
    std::optional<ProfileReport> profile;
    std::optional<LocationReport> location;
    std::optional<UniquenessReport> uniqueness;
    std::optional<PohozaevReport> pohozaev;

    std::vector<Check> all_checks() const;
    bool passed() const;
};

// Writes manifest.txt, constants.csv, sweep.jsonl and report.csv into cfg.out_dir.
void write_outputs(Context& ctx, const VerificationReport& report);
VerificationReport run_all(Context& ctx);

// 0 pass, 1 threshold failure, 2 input error, 3 solver failure.
int exit_code_for(ErrorKind kind);

}  // namespace gpspike
