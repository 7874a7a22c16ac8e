#include "gpspike/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gpspike/errors.hpp"

namespace gpspike {

namespace {

namespace pt = boost::property_tree;

double to_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || text.find_first_not_of(" \t", used) != std::string::npos)
        throw Error(ErrorKind::InputError, "key '" + key + "': not a number: '" + text + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& text) {
    const double v = to_double(key, text);
    if (v != std::floor(v)) throw Error(ErrorKind::InputError, "key '" + key + "': expected an integer");
    return static_cast<long long>(v);
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
    if (out.empty()) throw Error(ErrorKind::InputError, "key '" + key + "': empty list");
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto real = [&](const char* name, auto member) {
            t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_double(k, v); };
        };
        auto integer = [&](const char* name, auto member) {
            t[name] = [member](RunConfig& c, const std::string& k, const std::string& v) {
                member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_int(k, v));
            };
        };
        auto text = [&](const char* name, auto member) {
            t[name] = [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; };
        };
        real("radial.step", [](RunConfig& c) -> double& { return c.radial.step; });
        integer("radial.count", [](RunConfig& c) -> int& { return c.radial.count; });
        real("linear.half_width", [](RunConfig& c) -> double& { return c.corr_half_width; });
        real("linear.step", [](RunConfig& c) -> double& { return c.corr_step; });
        integer("gp.n", [](RunConfig& c) -> int& { return c.gp.n; });
        real("gp.half_width", [](RunConfig& c) -> double& { return c.gp.half_width; });
        real("gp.collapse_margin", [](RunConfig& c) -> double& { return c.minimize.collapse_margin; });
        real("gp.min_cells", [](RunConfig& c) -> double& { return c.minimize.min_cells; });
        real("gp.flow_exit", [](RunConfig& c) -> double& { return c.minimize.flow_exit; });
        integer("gp.max_flow", [](RunConfig& c) -> int& { return c.minimize.max_flow; });
        real("gp.el_tol", [](RunConfig& c) -> double& { return c.minimize.el_tol; });
        integer("gp.max_newton", [](RunConfig& c) -> int& { return c.minimize.max_newton; });
        real("gp.newton_tol", [](RunConfig& c) -> double& { return c.minimize.newton_tol; });
        real("potential.p", [](RunConfig& c) -> double& { return c.p; });
        real("potential.delta", [](RunConfig& c) -> double& { return c.delta; });
        text("potential.h0", [](RunConfig& c) -> std::string& { return c.h0; });
        text("potential.g", [](RunConfig& c) -> std::string& { return c.g; });
        t["sweep.ratios"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep = to_list(k, v); };
        real("sweep.coarse_weight", [](RunConfig& c) -> double& { return c.coarse_weight; });
        integer("uniqueness.starts", [](RunConfig& c) -> int& { return c.uniqueness_starts; });
        real("uniqueness.ratio", [](RunConfig& c) -> double& { return c.uniqueness_ratio; });
        integer("uniqueness.n", [](RunConfig& c) -> int& { return c.uniqueness_n; });
        real("pohozaev.ratio", [](RunConfig& c) -> double& { return c.pohozaev_ratio; });
        integer("pohozaev.coarse_n", [](RunConfig& c) -> int& { return c.pohozaev_coarse_n; });
        real("pohozaev.radius", [](RunConfig& c) -> double& { return c.pohozaev_radius; });
        real("thresholds.slope_tol", [](RunConfig& c) -> double& { return c.thresholds.slope_tol; });
        real("thresholds.prefactor_tol", [](RunConfig& c) -> double& { return c.thresholds.prefactor_tol; });
        real("thresholds.mu_final_tol", [](RunConfig& c) -> double& { return c.thresholds.mu_final_tol; });
        real("thresholds.c_star_tol", [](RunConfig& c) -> double& { return c.thresholds.c_star_tol; });
        real("thresholds.profile_tol", [](RunConfig& c) -> double& { return c.thresholds.profile_tol; });
        real("thresholds.profile_check_ratio", [](RunConfig& c) -> double& { return c.thresholds.profile_check_ratio; });
        real("thresholds.order_target", [](RunConfig& c) -> double& { return c.thresholds.order_target; });
        real("thresholds.order_tol", [](RunConfig& c) -> double& { return c.thresholds.order_tol; });
        real("thresholds.location_tol", [](RunConfig& c) -> double& { return c.thresholds.location_tol; });
        real("thresholds.location_abs_tol", [](RunConfig& c) -> double& { return c.thresholds.location_abs_tol; });
        real("thresholds.unique_tol", [](RunConfig& c) -> double& { return c.thresholds.unique_tol; });
        real("thresholds.poho_ratio", [](RunConfig& c) -> double& { return c.thresholds.poho_ratio; });
        text("output.dir", [](RunConfig& c) -> std::string& { return c.out_dir; });
        t["run.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            const long long s = to_int(k, v);
            if (s < 0) throw Error(ErrorKind::InputError, "seed must be non-negative");
            c.seed = static_cast<std::uint64_t>(s);
        };
        integer("run.workers", [](RunConfig& c) -> int& { return c.workers; });
        return t;
    }();
    return table;
}

bool even_grid(int n) { return n >= 16 && n % 2 == 0; }

}  // namespace

PotentialSpec RunConfig::potential() const {
    PotentialSpec s = harmonic_spec(p);
    s.delta = delta;
    s.h0 = parse_h0(h0);
    parse_envelope(g, s);
    s.validate();
    return s;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InputError, m); };
    if (!(radial.step > 0.0) || radial.count < 100) fail("radial grid needs step > 0 and count >= 100");
    if (!(corr_step > 0.0) || !(corr_half_width > 4.0 * corr_step)) fail("linear grid is degenerate");
    if (!even_grid(gp.n) || !(gp.half_width > 0.0)) fail("gp grid needs an even n >= 16 and half_width > 0");
    if (sweep.empty()) fail("sweep needs at least one ratio");
    for (double r : sweep)
        if (!(r > 0.0 && r < 1.0)) fail("every sweep ratio a/a* must lie in (0, 1), got " + std::to_string(r));
    if (!(coarse_weight > 0.0 && coarse_weight <= 1.0)) fail("coarse_weight must lie in (0, 1]");
    if (uniqueness_starts < 5) fail("uniqueness needs at least five starts");
    if (!(uniqueness_ratio >= 0.9 && uniqueness_ratio < 1.0)) fail("uniqueness ratio must lie in [0.9, 1)");
    if (!even_grid(uniqueness_n)) fail("uniqueness grid needs an even n >= 16");
    if (!(pohozaev_ratio > 0.0 && pohozaev_ratio < 1.0)) fail("pohozaev ratio must lie in (0, 1)");
    if (!even_grid(pohozaev_coarse_n) || pohozaev_coarse_n >= gp.n) fail("pohozaev coarse grid must be coarser");
    if (!(pohozaev_radius > 0.0)) fail("pohozaev radius must be positive");
    const Thresholds& t = thresholds;
    for (double v : {t.slope_tol, t.prefactor_tol, t.mu_final_tol, t.c_star_tol, t.profile_tol, t.order_tol,
                     t.location_tol, t.location_abs_tol, t.unique_tol, t.poho_ratio})
        if (!(v > 0.0)) fail("tolerances must be positive");
    if (!(minimize.el_tol > 0.0) || !(minimize.newton_tol > 0.0) || !(minimize.collapse_margin > 0.0))
        fail("solver tolerances must be positive");
    if (workers < 0) fail("workers must be non-negative");
    if (out_dir.empty()) fail("output dir must be set");
    potential();
}

RunConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::InputError, std::string("config: ") + e.what());
    }
    RunConfig cfg;
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw Error(ErrorKind::InputError, "config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            auto it = table.find(full);
            if (it == table.end()) throw Error(ErrorKind::InputError, "config: unknown key '" + full + "'");
            it->second(cfg, full, trim(value.data()));
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::InputError, "cannot open config " + path);
    return parse_config(f);
}

std::string config_summary(const RunConfig& c) {
    std::ostringstream o;
    o << std::setprecision(12);
    o << "radial.step = " << c.radial.step << "\nradial.count = " << c.radial.count << "\n";
    o << "linear.half_width = " << c.corr_half_width << "\nlinear.step = " << c.corr_step << "\n";
    o << "gp.n = " << c.gp.n << "\ngp.half_width = " << c.gp.half_width << "\n";
    o << "potential.p = " << c.p << "\npotential.delta = " << c.delta << "\npotential.h0 = " << c.h0
      << "\npotential.g = " << c.g << "\n";
    o << "sweep.ratios = ";
    for (std::size_t i = 0; i < c.sweep.size(); ++i) o << (i ? ", " : "") << c.sweep[i];
    o << "\nsweep.coarse_weight = " << c.coarse_weight << "\n";
    o << "uniqueness.starts = " << c.uniqueness_starts << "\nuniqueness.ratio = " << c.uniqueness_ratio
      << "\nuniqueness.n = " << c.uniqueness_n << "\n";
    o << "pohozaev.ratio = " << c.pohozaev_ratio << "\npohozaev.coarse_n = " << c.pohozaev_coarse_n
      << "\npohozaev.radius = " << c.pohozaev_radius << "\n";
    o << "run.seed = " << c.seed << "\n";
    return o.str();
}

// ---------------------------------------------------------------------------

Context::Context(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    spec_ = cfg_.potential();
}

Context::~Context() = default;

const TownesProfile& Context::townes() {
    if (!townes_) townes_ = solve_townes(cfg_.radial);
    return *townes_;
}

const PotentialAnalysis& Context::analysis() {
    if (!an_) an_ = find_critical_point(spec_, townes());
    return *an_;
}

const LinearOperator& Context::op() {
    if (!op_)
        op_ = std::make_unique<LinearOperator>(townes(), CartesianGrid2D::make(cfg_.corr_half_width, cfg_.corr_step));
    return *op_;
}

const CorrectionSet& Context::corrections() {
    if (!corr_) corr_ = build_corrections(op(), spec_, analysis());
    return *corr_;
}

const AsymptoticConstants& Context::constants() {
    if (!constants_) constants_ = compute_constants(corrections(), op(), analysis(), spec_);
    return *constants_;
}

const std::vector<GroundState2D>& Context::sweep() {
    if (sweep_) return *sweep_;
    const TownesProfile& t = townes();
    const PotentialAnalysis& an = analysis();
    const std::size_t n = cfg_.sweep.size();
    std::vector<GroundState2D> states(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                states[i] = minimize(spec_, t, an, cfg_.sweep[i] * t.a_star, cfg_.gp, cfg_.minimize);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t pool = std::min<std::size_t>(n, cfg_.workers > 0 ? cfg_.workers : hw);
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t k = 0; k < pool; ++k) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    sweep_ = std::move(states);
    return *sweep_;
}

// ---------------------------------------------------------------------------

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || w.size() != n) throw Error(ErrorKind::InsufficientPoints, "line fit needs two points");
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorKind::InsufficientPoints, "line fit needs distinct abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += w[i] * r * r;
    }
    f.rms = std::sqrt(ss / sw);
    f.slope_se = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
    return f;
}

std::vector<double> sweep_weights(const std::vector<double>& ratios, double coarse_weight) {
    std::vector<double> w(ratios.size(), 1.0);
    if (ratios.size() < 4) return w;
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ratios[a] < ratios[b]; });
    w[order[0]] = coarse_weight;
    w[order[1]] = coarse_weight;
    return w;
}

namespace {

Check make_check(std::string name, double value, double reference, double tol, bool pass, std::string note = {}) {
    Check c;
    c.name = std::move(name);
    c.value = value;
    c.reference = reference;
    c.tolerance = tol;
    c.pass = pass;
    c.note = std::move(note);
    return c;
}

// Indices of the sweep sorted by increasing a.
std::vector<std::size_t> sweep_order(const RunConfig& cfg) {
    std::vector<std::size_t> order(cfg.sweep.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cfg.sweep[a] < cfg.sweep[b]; });
    return order;
}

bool radial_potential(const RunConfig& cfg, const PotentialSpec& spec) {
    const bool iso = spec.delta == 0.0 || spec.h0.empty();
    return iso && spec.envelope.infinite() && cfg.g.rfind("const:", 0) == 0;
}

}  // namespace

ScalingReport run_scaling_study(Context& ctx) {
    const RunConfig& cfg = ctx.config();
    const auto order = sweep_order(cfg);
    if (order.size() < 4) throw Error(ErrorKind::InsufficientPoints, "scaling study needs at least four sweep points");
    const double span = (1.0 - cfg.sweep[order.front()]) / (1.0 - cfg.sweep[order.back()]);
    if (span < 10.0) throw Error(ErrorKind::InsufficientPoints, "sweep must span a decade in a* - a");
    const auto& states = ctx.sweep();
    const auto& an = ctx.analysis();
    const double p = cfg.p;

    ScalingReport rep;
    std::vector<double> ratios, x, y;
    for (std::size_t i : order) {
        const auto& st = states[i];
        rep.points.push_back({cfg.sweep[i], st.scale.alpha, st.scale.eps, st.energy, predict_energy(an, st.scale)});
        ratios.push_back(cfg.sweep[i]);
        x.push_back(std::log(st.scale.alpha));
        y.push_back(std::log(st.energy));
    }
    rep.weights = sweep_weights(ratios, cfg.coarse_weight);
    rep.fit = fit_line(x, y, rep.weights);
    rep.slope_expected = p / (2.0 + p);
    rep.prefactor_expected = an.lambda * an.lambda * (p + 2.0) / (p * ctx.townes().a_star);
    double lw = 0.0, sw = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        lw += rep.weights[k] * (y[k] - rep.slope_expected * x[k]);
        sw += rep.weights[k];
    }
    rep.prefactor = std::exp(lw / sw);

    const auto& t = cfg.thresholds;
    const double ds = std::abs(rep.fit.slope - rep.slope_expected);
    const double dp = std::abs(rep.prefactor / rep.prefactor_expected - 1.0);
    std::ostringstream note;
    note << "weights coarse=" << cfg.coarse_weight << " slope_se=" << rep.fit.slope_se;
    rep.checks.push_back(make_check("energy exponent", rep.fit.slope, rep.slope_expected, t.slope_tol, ds <= t.slope_tol,
                                    note.str()));
    rep.checks.push_back(make_check("energy prefactor", rep.prefactor, rep.prefactor_expected, t.prefactor_tol,
                                    dp <= t.prefactor_tol, "relative; slope fixed at p/(2+p)"));
    return rep;
}

MuReport run_mu_study(Context& ctx) {
    const RunConfig& cfg = ctx.config();
    const auto order = sweep_order(cfg);
    const auto& states = ctx.sweep();
    const auto& an = ctx.analysis();
    // Without a non-degenerate critical point there are no expansion constants to compare against.
    const bool have_c = an.nondegenerate;
    const AsymptoticConstants c = have_c ? ctx.constants() : AsymptoticConstants{};
    const double l2 = an.lambda * an.lambda;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    MuReport rep;
    rep.c_star = c.c_star;
    rep.c0_expected = -l2;
    rep.c1_expected = l2 * c.c_star;
    double a11 = 0.0, a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t i : order) {
        const auto& st = states[i];
        const auto s = st.scale.with_mu(st.mu, an.lambda);
        MuPoint pnt;
        pnt.ratio = cfg.sweep[i];
        pnt.alpha = s.alpha;
        pnt.eps = s.eps;
        pnt.mu = st.mu;
        pnt.mu_scaled = st.mu * s.eps * s.eps / l2;
        pnt.beta = s.beta;
        pnt.beta_over_alpha = s.beta / s.alpha;
        pnt.beta_predicted = have_c ? predict_beta(c, s) : nan;
        pnt.mu_predicted = have_c && c.m == EnvelopeTaylor::kInfinite ? predict_mu(c, an, s) : nan;
        rep.points.push_back(pnt);
        const double f1 = 1.0 / (s.eps * s.eps), f2 = std::pow(s.eps, cfg.p);
        a11 += f1 * f1;
        a12 += f1 * f2;
        a22 += f2 * f2;
        b1 += f1 * st.mu;
        b2 += f2 * st.mu;
    }
    const double det = a11 * a22 - a12 * a12;
    if (rep.points.size() >= 2 && std::abs(det) > 1e-300) {
        rep.c0 = (a22 * b1 - a12 * b2) / det;
        rep.c1 = (a11 * b2 - a12 * b1) / det;
    }
    rep.monotone = true;
    for (std::size_t k = 1; k < rep.points.size(); ++k)
        if (!(std::abs(rep.points[k].mu_scaled + 1.0) < std::abs(rep.points[k - 1].mu_scaled + 1.0))) rep.monotone = false;

    const auto& t = cfg.thresholds;
    const auto& last = rep.points.back();
    const double dev = std::abs(last.mu_scaled + 1.0);
    rep.checks.push_back(make_check("mu scaling monotone", rep.monotone ? 1.0 : 0.0, 1.0, 0.0, rep.monotone,
                                    "|mu eps^2/lambda^2 + 1| strictly decreasing in a"));
    rep.checks.push_back(make_check("mu scaling final", last.mu_scaled, -1.0, t.mu_final_tol, dev < t.mu_final_tol));
    if (!have_c) {
        rep.checks.push_back(make_check("beta vs prediction", last.beta, nan, t.c_star_tol, false,
                                        "Degenerate: no expansion constants"));
        return rep;
    }
    const double rel = std::abs(last.beta / last.beta_predicted - 1.0);
    std::ostringstream note;
    note << "beta/alpha=" << std::setprecision(6) << last.beta_over_alpha << " case=" << case_name(c.case_tag);
    rep.checks.push_back(
        make_check("beta vs prediction", last.beta, last.beta_predicted, t.c_star_tol, rel <= t.c_star_tol, note.str()));
    return rep;
}

ProfileReport run_profile_study(Context& ctx) {
    ProfileReport rep;
    const RunConfig& cfg = ctx.config();
    const auto& an = ctx.analysis();
    if (!an.nondegenerate) {
        rep.skipped = "Degenerate: Hessian of H is singular at y0";
        return rep;
    }
    const auto order = sweep_order(cfg);
    const auto& states = ctx.sweep();
    const auto& townes = ctx.townes();
    const auto& corr = ctx.corrections();
    const auto& c = ctx.constants();
    const double sqrt_as = std::sqrt(townes.a_star);

    std::vector<double> ratios, lx, ly;
    for (std::size_t i : order) {
        const auto& st = states[i];
        const auto& s = st.scale;
        const Field2D first = predict_rescaled_correction(c, corr, s, Order::First);
        const Field2D second = predict_rescaled_correction(c, corr, s, Order::Second);
        const double k = an.lambda / s.eps, amp = s.eps * sqrt_as / an.lambda;
        const double dz2 = std::pow(k * st.grid.step(), 2);
        double n2 = 0.0, e1 = 0.0, e2 = 0.0, linf = 0.0;
        for (int a = 0; a < st.grid.n; ++a)
            for (int b = 0; b < st.grid.n; ++b) {
                const double zx = k * (st.grid.coord(a) - st.x_max[0]), zy = k * (st.grid.coord(b) - st.x_max[1]);
                const double wk = amp * st.u[st.grid.index(a, b)] - townes.value(std::hypot(zx, zy));
                const double r1 = wk - interpolate(first, zx, zy), r2 = wk - interpolate(second, zx, zy);
                n2 += wk * wk;
                e1 += r1 * r1;
                e2 += r2 * r2;
                linf = std::max(linf, std::abs(r1));
            }
        ProfilePoint pp;
        pp.ratio = cfg.sweep[i];
        pp.alpha = s.alpha;
        pp.norm_wk = std::sqrt(n2 * dz2);
        pp.err_leading = pp.norm_wk;
        pp.err_first = std::sqrt(e1 * dz2);
        pp.err_second = std::sqrt(e2 * dz2);
        pp.linf_first = linf;
        pp.rel_first = pp.err_first / pp.norm_wk;
        rep.points.push_back(pp);
        ratios.push_back(pp.ratio);
        lx.push_back(std::log(pp.alpha));
        ly.push_back(std::log(pp.err_first));
    }

    const auto& t = cfg.thresholds;
    const ProfilePoint* judged = nullptr;
    for (const auto& pp : rep.points)
        if (std::abs(pp.ratio - t.profile_check_ratio) < 1e-9) judged = &pp;
    if (judged)
        rep.checks.push_back(make_check("first-order profile", judged->rel_first, 0.0, t.profile_tol,
                                        judged->rel_first < t.profile_tol, "relative L2 at a/a*=" +
                                                                               std::to_string(judged->ratio)));
    else
        rep.checks.push_back(make_check("first-order profile", 0.0, 0.0, t.profile_tol, false,
                                        "check ratio not in sweep"));
    if (rep.points.size() >= 3) {
        rep.remainder_fit = fit_line(lx, ly, sweep_weights(ratios, cfg.coarse_weight));
        const double d = std::abs(rep.remainder_fit.slope - t.order_target);
        std::ostringstream note;
        note << "weights coarse=" << cfg.coarse_weight << " slope_se=" << rep.remainder_fit.slope_se;
        rep.checks.push_back(
            make_check("remainder order", rep.remainder_fit.slope, t.order_target, t.order_tol, d <= t.order_tol, note.str()));
    } else {
        rep.checks.push_back(make_check("remainder order", 0.0, t.order_target, t.order_tol, false, "fewer than 3 points"));
    }
    return rep;
}

LocationReport run_location_study(Context& ctx) {
    LocationReport rep;
    const RunConfig& cfg = ctx.config();
    const auto& an = ctx.analysis();
    rep.y0 = an.y0;
    if (!an.nondegenerate) {
        rep.skipped = "Degenerate: Hessian of H is singular at y0";
        return rep;
    }
    const auto order = sweep_order(cfg);
    const auto& states = ctx.sweep();
    const auto& corr = ctx.corrections();
    const auto& c = ctx.constants();
    rep.y_sup_predicted = corr.y_sup;

    std::vector<double> ratios, lx, ly;
    double num[2] = {0.0, 0.0}, den = 0.0;
    const auto w = sweep_weights([&] {
        std::vector<double> r;
        for (std::size_t i : order) r.push_back(cfg.sweep[i]);
        return r;
    }(), cfg.coarse_weight);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t i = order[k];
        const auto& st = states[i];
        const auto& s = st.scale;
        LocationPoint lp;
        lp.ratio = cfg.sweep[i];
        lp.alpha = s.alpha;
        lp.eps = s.eps;
        lp.x_max = st.x_max;
        lp.scaled = {an.lambda * st.x_max[0] / s.eps, an.lambda * st.x_max[1] / s.eps};
        lp.error = std::hypot(lp.scaled[0] - an.y0[0], lp.scaled[1] - an.y0[1]);
        lp.predicted = predict_location(c, corr, an, s, Order::First);
        rep.points.push_back(lp);
        ratios.push_back(lp.ratio);
        lx.push_back(std::log(s.eps));
        ly.push_back(std::log(std::max(lp.error, 1e-300)));
        for (int j = 0; j < 2; ++j) num[j] += w[k] * s.alpha * (lp.scaled[j] - an.y0[j]);
        den += w[k] * s.alpha * s.alpha;
    }
    for (int j = 0; j < 2; ++j) rep.y_sup_empirical[j] = (num[j] / den - c.c_star * an.y0[j] / 2.0) / an.lambda;

    const auto& t = cfg.thresholds;
    const double y0n = std::hypot(an.y0[0], an.y0[1]);
    const auto& last = rep.points.back();
    if (y0n > 0.0) {
        rep.rate_fit = fit_line(lx, ly, sweep_weights(ratios, cfg.coarse_weight));
        std::ostringstream note;
        note << "relative to |y0|; fitted rate in eps " << std::setprecision(4) << rep.rate_fit.slope;
        rep.checks.push_back(make_check("spike location", last.error / y0n, 0.0, t.location_tol,
                                        last.error / y0n < t.location_tol, note.str()));
    } else {
        double worst = 0.0;
        for (const auto& lp : rep.points) worst = std::max(worst, std::hypot(lp.x_max[0], lp.x_max[1]));
        const double tol = t.location_abs_tol * ctx.config().gp.step();
        rep.checks.push_back(make_check("spike at origin", worst, 0.0, tol, worst < tol, "max |x_max| over the sweep"));
    }
    return rep;
}

UniquenessReport run_uniqueness_study(Context& ctx) {
    const RunConfig& cfg = ctx.config();
    UniquenessReport rep;
    const PeriodicGrid grid{cfg.uniqueness_n, cfg.gp.half_width};
    rep.result = uniqueness_probe(ctx.spec(), ctx.townes(), ctx.analysis(), cfg.uniqueness_ratio * ctx.townes().a_star,
                                  grid, cfg.uniqueness_starts, cfg.seed, cfg.minimize);
    const double tol = cfg.thresholds.unique_tol;
    rep.checks.push_back(make_check("uniqueness", rep.result.max_distance, 0.0, tol, rep.result.max_distance < tol,
                                    std::to_string(rep.result.starts) + " starts, pairwise Linf"));
    return rep;
}

PohozaevReport run_pohozaev_study(Context& ctx) {
    const RunConfig& cfg = ctx.config();
    PohozaevReport rep;
    const double a = cfg.pohozaev_ratio * ctx.townes().a_star;
    const auto coarse = minimize(ctx.spec(), ctx.townes(), ctx.analysis(), a,
                                 PeriodicGrid{cfg.pohozaev_coarse_n, cfg.gp.half_width}, cfg.minimize);
    const auto fine = minimize(ctx.spec(), ctx.townes(), ctx.analysis(), a, cfg.gp, cfg.minimize);
    rep.radius = cfg.pohozaev_radius * fine.scale.eps / ctx.analysis().lambda;
    rep.coarse = pohozaev_residual(coarse, ctx.spec(), rep.radius);
    rep.fine = pohozaev_residual(fine, ctx.spec(), rep.radius);
    const double mc = std::hypot(rep.coarse.mismatch[0], rep.coarse.mismatch[1]);
    const double mf = std::hypot(rep.fine.mismatch[0], rep.fine.mismatch[1]);
    rep.ratio = mc / std::max(mf, 1e-300);
    if (radial_potential(cfg, ctx.spec())) {
        const double worst = std::max({std::abs(rep.fine.area[0]), std::abs(rep.fine.area[1]), mf}) / rep.fine.scale;
        rep.checks.push_back(make_check("pohozaev radial components", worst, 0.0, 1e-10, worst < 1e-10,
                                        "relative to the identity scale"));
    } else {
        rep.checks.push_back(make_check("pohozaev refinement", rep.ratio, cfg.thresholds.poho_ratio, 0.0,
                                        rep.ratio >= cfg.thresholds.poho_ratio,
                                        "mismatch ratio n=" + std::to_string(cfg.pohozaev_coarse_n) + " vs " +
                                            std::to_string(cfg.gp.n)));
    }
    return rep;
}

std::vector<Check> VerificationReport::all_checks() const {
    std::vector<Check> out;
    auto add = [&](const auto& section) {
        if (section) out.insert(out.end(), section->checks.begin(), section->checks.end());
    };
    add(scaling);
    add(mu);
    add(profile);
    add(location);
    add(uniqueness);
    add(pohozaev);
    return out;
}

bool VerificationReport::passed() const {
    for (const auto& c : all_checks())
        if (!c.pass) return false;
    return true;
}

namespace {

void write_checks(std::ostream& o, const std::string& study, const std::vector<Check>& checks) {
    for (const auto& c : checks)
        o << study << ',' << c.name << ',' << c.value << ',' << c.reference << ',' << c.tolerance << ','
          << (c.pass ? "PASS" : "FAIL") << ",\"" << c.note << "\"\n";
}

}  // namespace

void write_outputs(Context& ctx, const VerificationReport& r) {
    namespace fs = std::filesystem;
    const fs::path dir = ctx.config().out_dir;
    fs::create_directories(dir);
    std::vector<std::string> files;

    if (r.scaling || r.mu || r.profile || r.location) {
        std::ofstream f(dir / "sweep.jsonl");
        for (const auto& st : ctx.sweep()) f << sweep_record_json(st) << '\n';
        files.push_back("sweep.jsonl");
        if (ctx.analysis().nondegenerate) {
            write_constants_csv((dir / "constants.csv").string(), ctx.constants());
            files.push_back("constants.csv");
        }
    }

    std::ofstream rep(dir / "report.csv");
    rep << std::setprecision(10) << "study,check,value,reference,tolerance,status,note\n";
    if (r.scaling) write_checks(rep, "scaling", r.scaling->checks);
    if (r.mu) write_checks(rep, "mu", r.mu->checks);
    if (r.profile) {
        if (!r.profile->skipped.empty()) rep << "profile,skipped,0,0,0,SKIP,\"" << r.profile->skipped << "\"\n";
        write_checks(rep, "profile", r.profile->checks);
    }
    if (r.location) {
        if (!r.location->skipped.empty()) rep << "location,skipped,0,0,0,SKIP,\"" << r.location->skipped << "\"\n";
        write_checks(rep, "location", r.location->checks);
    }
    if (r.uniqueness) write_checks(rep, "uniqueness", r.uniqueness->checks);
    if (r.pohozaev) write_checks(rep, "pohozaev", r.pohozaev->checks);
    files.push_back("report.csv");

    if (r.scaling) {
        std::ofstream f(dir / "scaling.csv");
        f << std::setprecision(12) << "ratio,alpha,eps,energy,predicted,weight\n";
        for (std::size_t k = 0; k < r.scaling->points.size(); ++k) {
            const auto& p = r.scaling->points[k];
            f << p.ratio << ',' << p.alpha << ',' << p.eps << ',' << p.energy << ',' << p.predicted << ','
              << r.scaling->weights[k] << '\n';
        }
        files.push_back("scaling.csv");
    }
    if (r.mu) {
        std::ofstream f(dir / "mu.csv");
        f << std::setprecision(12) << "ratio,alpha,eps,mu,mu_scaled,beta,beta_over_alpha,beta_predicted,mu_predicted\n";
        for (const auto& p : r.mu->points)
            f << p.ratio << ',' << p.alpha << ',' << p.eps << ',' << p.mu << ',' << p.mu_scaled << ',' << p.beta << ','
              << p.beta_over_alpha << ',' << p.beta_predicted << ',' << p.mu_predicted << '\n';
        f << "# fit mu = c0/eps^2 + c1 eps^p: c0=" << r.mu->c0 << " (" << r.mu->c0_expected << ") c1=" << r.mu->c1
          << " (" << r.mu->c1_expected << ")\n";
        files.push_back("mu.csv");
    }
    if (r.profile && r.profile->skipped.empty()) {
        std::ofstream f(dir / "profile.csv");
        f << std::setprecision(12) << "ratio,alpha,norm_wk,err_leading,err_first,err_second,linf_first,rel_first\n";
        for (const auto& p : r.profile->points)
            f << p.ratio << ',' << p.alpha << ',' << p.norm_wk << ',' << p.err_leading << ',' << p.err_first << ','
              << p.err_second << ',' << p.linf_first << ',' << p.rel_first << '\n';
        files.push_back("profile.csv");
    }
    if (r.location && r.location->skipped.empty()) {
        std::ofstream f(dir / "location.csv");
        f << std::setprecision(12) << "ratio,alpha,eps,x1,x2,scaled1,scaled2,error,pred1,pred2\n";
        for (const auto& p : r.location->points)
            f << p.ratio << ',' << p.alpha << ',' << p.eps << ',' << p.x_max[0] << ',' << p.x_max[1] << ','
              << p.scaled[0] << ',' << p.scaled[1] << ',' << p.error << ',' << p.predicted[0] << ','
              << p.predicted[1] << '\n';
        f << "# y_sup empirical=(" << r.location->y_sup_empirical[0] << ',' << r.location->y_sup_empirical[1]
          << ") predicted=(" << r.location->y_sup_predicted[0] << ',' << r.location->y_sup_predicted[1] << ")\n";
        files.push_back("location.csv");
    }

    std::ofstream man(dir / "manifest.txt");
    man << "# gpspike run\n" << config_summary(ctx.config());
    man << "status = " << (r.passed() ? "pass" : "fail") << "\nfiles = ";
    files.push_back("manifest.txt");
    for (std::size_t i = 0; i < files.size(); ++i) man << (i ? ", " : "") << files[i];
    man << '\n';
}

VerificationReport run_all(Context& ctx) {
    VerificationReport r;
    r.scaling = run_scaling_study(ctx);
    r.mu = run_mu_study(ctx);
    r.profile = run_profile_study(ctx);
    r.location = run_location_study(ctx);
    r.uniqueness = run_uniqueness_study(ctx);
    r.pohozaev = run_pohozaev_study(ctx);
    write_outputs(ctx, r);
    return r;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InputError:
        case ErrorKind::WrongCase:
        case ErrorKind::GridTooCoarse:
        case ErrorKind::BallOutsideGrid:
        case ErrorKind::InsufficientPoints: return 2;
        default: return 3;
    }
}

}  // namespace gpspike
