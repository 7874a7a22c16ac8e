// Command-line front end: pipeline stages and verification studies.
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gpspike/errors.hpp"
#include "gpspike/verify.hpp"

using namespace gpspike;

namespace {

struct Common {
    std::string config;
    std::string out;
    long long seed = -1;
};

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
    cfg.validate();
    return cfg;
}

void print_checks(const std::vector<Check>& checks) {
    for (const auto& c : checks)
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": value=" << c.value << " reference=" << c.reference
                  << " tol=" << c.tolerance << (c.note.empty() ? "" : "  (" + c.note + ")") << '\n';
}

int cmd_townes(Context& ctx) {
    const auto& t = ctx.townes();
    const auto id = radial_identity_report(t);
    std::filesystem::create_directories(ctx.config().out_dir);
    const auto path = (std::filesystem::path(ctx.config().out_dir) / "townes.csv").string();
    save_profile(path, t);
    std::cout << "w(0)            " << t.w0 << "\na*              " << t.a_star << "\node residual    "
              << t.ode_residual << "\ngrad vs mass    " << id.grad_vs_mass << "\nmass vs quartic " << id.mass_vs_quartic
              << "\nrho1 rho2 rho3  " << id.rho1 << ' ' << id.rho2 << ' ' << id.rho3 << "\nprofile         " << path
              << '\n';
    return 0;
}

int cmd_potential(Context& ctx) {
    const auto& an = ctx.analysis();
    std::cout << "y0        (" << an.y0[0] << ", " << an.y0[1] << ")\nH(y0)     " << an.H0 << "\nhess H    [["
              << an.hessH[0][0] << ", " << an.hessH[0][1] << "], [" << an.hessH[1][0] << ", " << an.hessH[1][1]
              << "]]\nlambda    " << an.lambda << "\nnondegenerate " << (an.nondegenerate ? "yes" : "no (Degenerate)")
              << '\n';
    return 0;
}

int cmd_corrections(Context& ctx) {
    const auto& c = ctx.corrections();
    const auto dir = (std::filesystem::path(ctx.config().out_dir) / "corrections").string();
    export_corrections(dir, c, ctx.config().p);
    std::cout << "y_sup  (" << c.y_sup[0] << ", " << c.y_sup[1] << ")\nx0     (" << c.x0[0] << ", " << c.x0[1]
              << ")\nphi    " << (c.has_phi ? "yes" : "no") << "\nfields " << dir << '\n';
    return 0;
}

int cmd_constants(Context& ctx) {
    const auto& c = ctx.constants();
    std::filesystem::create_directories(ctx.config().out_dir);
    const auto path = (std::filesystem::path(ctx.config().out_dir) / "constants.csv").string();
    write_constants_csv(path, c);
    std::cout << "case   " << case_name(c.case_tag) << "\nC*     " << c.c_star << "\nC1*    " << c.c1_star
              << "\nC2*    " << c.c2_star << "\nS      " << c.s_val << "\nI      " << c.i_val << "\nII     " << c.ii_val
              << "\nfile   " << path << '\n';
    return 0;
}

int cmd_minimize(Context& ctx, double ratio, bool dump) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::InputError, "--a is a/a* and must lie in (0, 1)");
    const auto& cfg = ctx.config();
    const auto st = minimize(ctx.spec(), ctx.townes(), ctx.analysis(), ratio * ctx.townes().a_star, cfg.gp, cfg.minimize);
    std::cout << sweep_record_json(st) << '\n';
    if (dump) {
        std::filesystem::create_directories(cfg.out_dir);
        write_state_csv((std::filesystem::path(cfg.out_dir) / "state.csv").string(), st);
    }
    return 0;
}

int cmd_verify(Context& ctx, const std::string& which) {
    VerificationReport r;
    if (which == "all") {
        r = run_all(ctx);
    } else {
        if (which == "scaling") r.scaling = run_scaling_study(ctx);
        else if (which == "mu") r.mu = run_mu_study(ctx);
        else if (which == "profile") {
            r.profile = run_profile_study(ctx);
            r.location = run_location_study(ctx);
        } else if (which == "uniqueness") r.uniqueness = run_uniqueness_study(ctx);
        else if (which == "pohozaev") r.pohozaev = run_pohozaev_study(ctx);
        write_outputs(ctx, r);
    }
    if (r.profile && !r.profile->skipped.empty()) std::cout << "[SKIP] profile: " << r.profile->skipped << '\n';
    if (r.location && !r.location->skipped.empty()) std::cout << "[SKIP] location: " << r.location->skipped << '\n';
    print_checks(r.all_checks());
    std::cout << "report: " << ctx.config().out_dir << "/report.csv\n";
    return r.passed() ? 0 : 1;
}

void write_failure(const std::string& dir, const std::string& kind, const std::string& what) {
    try {
        std::filesystem::create_directories(dir);
        std::ofstream f(std::filesystem::path(dir) / "failure.json");
        f << "{\"kind\": \"" << kind << "\", \"message\": " << std::quoted(what) << "}\n";
    } catch (...) {
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attractive 2D Gross-Pitaevskii ground states and spike-expansion checks"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config, "INI run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", common.out, "output directory");
    app.add_option("--seed", common.seed, "seed for randomized starts")->check(CLI::NonNegativeNumber);

    auto* townes = app.add_subcommand("townes", "solve the radial ground state and report its identities");
    auto* potential = app.add_subcommand("analyze-potential", "critical point of H and the spike scale");
    auto* corrections = app.add_subcommand("corrections", "solve and export the correction profiles");
    auto* constants = app.add_subcommand("constants", "expansion constants and case dispatch");
    auto* mini = app.add_subcommand("minimize", "minimize the GP energy at one interaction strength");
    double ratio = 0.0;
    bool dump = false;
    mini->add_option("--a", ratio, "interaction strength as a fraction of a*")->required();
    mini->add_flag("--dump", dump, "write the field to state.csv");
    auto* verify = app.add_subcommand("verify", "run verification studies");
    std::string which = "all";
    verify->add_option("study", which, "scaling | mu | profile | uniqueness | pohozaev | all")
        ->check(CLI::IsMember({"scaling", "mu", "profile", "uniqueness", "pohozaev", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::cout << std::setprecision(10);
    std::string out_dir = common.out.empty() ? RunConfig{}.out_dir : common.out;
    try {
        Context ctx(resolve(common));
        out_dir = ctx.config().out_dir;
        if (*townes) return cmd_townes(ctx);
        if (*potential) return cmd_potential(ctx);
        if (*corrections) return cmd_corrections(ctx);
        if (*constants) return cmd_constants(ctx);
        if (*mini) return cmd_minimize(ctx, ratio, dump);
        if (*verify) return cmd_verify(ctx, which);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        write_failure(out_dir, kind_name(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        write_failure(out_dir, "Internal", e.what());
        return 3;
    }
    return 2;
}
