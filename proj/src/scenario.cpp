#include "ouctrl/scenario.hpp"
#include "ouctrl/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ouctrl {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
    throw ConfigError("config error at '" + where + "': " + what);
}

const Json& require(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) config_fail(where, "missing field '" + key + "'");
    return j.at(key);
}

double require_number(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require(j, key, where);
    if (!v.is_number()) config_fail(where + "." + key, "expected a number");
    return v.get<double>();
}

int require_int(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require(j, key, where);
    if (!v.is_number_integer()) config_fail(where + "." + key, "expected an integer");
    return v.get<int>();
}

std::string require_string(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require(j, key, where);
    if (!v.is_string()) config_fail(where + "." + key, "expected a string");
    return v.get<std::string>();
}

double get_number(const Json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int get_int(const Json& j, const std::string& key, int fallback) {
    return j.contains(key) ? j.at(key).get<int>() : fallback;
}

Matrix parse_matrix(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) config_fail(where, "expected a nested array matrix");
    const std::size_t rows = j.size();
    const std::size_t cols = j.at(0).size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j.at(i).is_array() || j.at(i).size() != cols)
            config_fail(where, "matrix rows have inconsistent lengths");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
    }
    return m;
}

Vector parse_vector(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) config_fail(where, "expected an array vector");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

GridSpec parse_grid(const Json& scenario) {
    const Json& g = require(scenario, "grid", "scenario");
    try {
        return GridSpec::make(require_int(g, "dim", "grid"), require_int(g, "points", "grid"),
                              require_number(g, "half_width", "grid"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        config_fail("grid", e.what());
    }
}

Indicator parse_indicator(const Json& j, const std::string& where) {
    const std::string kind = require_string(j, "kind", where);
    if (kind == "all") return Indicator::all();
    if (kind == "none") return Indicator::none();
    if (kind == "halfspace")
        return Indicator::halfspace(parse_vector(require(j, "normal", where), where + ".normal"),
                                    require_number(j, "offset", where));
    if (kind == "ball")
        return Indicator::ball(parse_vector(require(j, "center", where), where + ".center"),
                               require_number(j, "radius", where));
    if (kind == "line_cone")
        return Indicator::line_cone(require_number(j, "alpha_lo", where),
                                    require_number(j, "alpha_hi", where));
    if (kind == "intervals") {
        std::vector<std::pair<double, double>> intervals;
        for (const auto& pair : require(j, "intervals", where))
            intervals.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
        return Indicator::interval_union(std::move(intervals));
    }
    if (kind == "periodic_intervals")
        return Indicator::periodic_intervals(require_number(j, "period", where),
                                             require_number(j, "width", where),
                                             get_number(j, "offset", 0.0));
    if (kind == "sparse_quadratic_intervals") return Indicator::sparse_quadratic_intervals();
    if (kind == "union" || kind == "intersection") {
        std::vector<Indicator> parts;
        for (const auto& part : require(j, "parts", where))
            parts.push_back(parse_indicator(part, where + ".parts[]"));
        return kind == "union" ? Indicator::union_of(std::move(parts))
                               : Indicator::intersection_of(std::move(parts));
    }
    if (kind == "complement")
        return Indicator::complement(parse_indicator(require(j, "part", where), where + ".part"));
    config_fail(where, "unknown indicator kind '" + kind + "'");
}

FlowOrientation parse_orientation(const Json& j, const std::string& where) {
    const std::string o = j.contains("orientation") ? j.at("orientation").get<std::string>()
                                                    : std::string("forward");
    if (o == "forward") return FlowOrientation::Forward;
    if (o == "reduction") return FlowOrientation::Reduction;
    config_fail(where + ".orientation", "expected 'forward' or 'reduction'");
}

MovingSupport parse_support(const Json& scenario, double horizon) {
    const Json& s = require(scenario, "support", "scenario");
    const std::string kind = require_string(s, "kind", "support");
    try {
        if (kind == "fixed")
            return MovingSupport::fixed(parse_indicator(require(s, "base", "support"),
                                                        "support.base"),
                                        require_int(s, "dim", "support"), horizon);
        if (kind == "flow")
            return MovingSupport::flow(
                parse_indicator(require(s, "base", "support"), "support.base"),
                parse_matrix(require(s, "b", "support"), "support.b"),
                parse_orientation(s, "support"), horizon);
        if (kind == "dilating")
            return MovingSupport::dilating(
                parse_indicator(require(s, "base", "support"), "support.base"),
                require_number(s, "mu", "support"), require_int(s, "dim", "support"), horizon);
        if (kind == "translation_cone")
            return translation_cone_support(require_number(s, "theta0", "support"), horizon,
                                            parse_orientation(s, "support"));
        if (kind == "rotation_cone")
            return rotation_cone_support(require_number(s, "theta0", "support"), horizon,
                                         parse_orientation(s, "support"));
        if (kind == "dilating_intervals")
            return dilating_interval_support(require_number(s, "mu", "support"), horizon);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        config_fail("support", e.what());
    }
    config_fail("support", "unknown support kind '" + kind + "'");
}

struct EquationSpec {
    std::string kind;
    double horizon = 0.0;
    Json raw;
};

EquationSpec parse_equation_spec(const Json& scenario) {
    const Json& e = require(scenario, "equation", "scenario");
    EquationSpec spec;
    spec.kind = require_string(e, "kind", "equation");
    spec.horizon = require_number(e, "horizon", "equation");
    if (!(spec.horizon > 0.0)) config_fail("equation.horizon", "must be positive");
    spec.raw = e;
    return spec;
}

SymbolFamily build_family(const EquationSpec& spec, double horizon) {
    const Json& e = spec.raw;
    try {
        if (spec.kind == "heat")
            return SymbolFamily::heat(parse_matrix(require(e, "q", "equation"), "equation.q"),
                                      horizon);
        if (spec.kind == "ou")
            return SymbolFamily::ou_reduction(
                MatrixPair::make(parse_matrix(require(e, "q", "equation"), "equation.q"),
                                 parse_matrix(require(e, "b", "equation"), "equation.b")),
                horizon);
        if (spec.kind == "poly") {
            std::vector<Matrix> coeffs;
            for (const auto& c : require(e, "coeffs", "equation"))
                coeffs.push_back(parse_matrix(c, "equation.coeffs[]"));
            return SymbolFamily::explicit_poly(std::move(coeffs), horizon);
        }
        if (spec.kind == "fractional")
            return SymbolFamily::fractional(require_number(e, "s", "equation"),
                                            horizon, require_int(e, "dim", "equation"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& err) {
        config_fail("equation", err.what());
    }
    config_fail("equation.kind", "unknown equation kind '" + spec.kind + "'");
}

MatrixPair parse_matrix_pair(const EquationSpec& spec) {
    if (spec.kind != "ou") config_fail("equation.kind", "this experiment needs an 'ou' equation");
    return MatrixPair::make(parse_matrix(require(spec.raw, "q", "equation"), "equation.q"),
                            parse_matrix(require(spec.raw, "b", "equation"), "equation.b"));
}

SpectralField parse_field(const Json& j, const GridSpec& grid, const std::string& where) {
    const std::string kind = require_string(j, "kind", where);
    if (kind == "gaussian") {
        const double sigma = require_number(j, "sigma", where);
        Vector center = Vector::Zero(grid.n);
        if (j.contains("center")) center = parse_vector(j.at("center"), where + ".center");
        std::vector<cplx> phys(grid.size());
        int idx[3];
        for (std::size_t i = 0; i < phys.size(); ++i) {
            grid.coords(i, idx);
            double r2 = 0.0;
            for (int axis = 0; axis < grid.n; ++axis) {
                const double x = grid.position(idx[axis]) - center[axis];
                r2 += x * x;
            }
            phys[i] = std::exp(-r2 / (2.0 * sigma * sigma));
        }
        auto f = SpectralField::from_physical(grid, std::move(phys));
        if (j.contains("normalize") && !j.at("normalize").get<bool>()) return f;
        std::vector<cplx> scaled = f.physical();
        const double norm = f.l2_norm();
        for (auto& z : scaled) z /= norm;
        return SpectralField::from_physical(grid, std::move(scaled));
    }
    if (kind == "gaussian_probe") {
        Vector center = Vector::Zero(grid.n);
        if (j.contains("center")) center = parse_vector(j.at("center"), where + ".center");
        return gaussian_probe(grid, center, require_number(j, "l", where));
    }
    if (kind == "single_mode") {
        std::vector<cplx> spec(grid.size(), cplx{});
        const Json& modes = require(j, "modes", where);
        if (static_cast<int>(modes.size()) != grid.n)
            config_fail(where + ".modes", "length must equal the grid dimension");
        std::size_t linear = 0;
        for (int axis = 0; axis < grid.n; ++axis) {
            int m = modes.at(axis).get<int>();
            if (m < 0) m += grid.points;
            linear = linear * grid.points + static_cast<std::size_t>(m);
        }
        spec[linear] = grid.box_volume();
        return SpectralField::from_spectral(grid, std::move(spec));
    }
    config_fail(where + ".kind", "unknown field kind '" + kind + "'");
}

std::vector<Vector> parse_centers(const Json& j, const std::string& where, double horizon) {
    const std::string kind = require_string(j, "kind", where);
    std::vector<Vector> centers;
    if (kind == "list") {
        for (const auto& c : require(j, "points", where))
            centers.push_back(parse_vector(c, where + ".points[]"));
        return centers;
    }
    if (kind == "grid2d") {
        const double lo = require_number(j, "lo", where);
        const double hi = require_number(j, "hi", where);
        const int count = require_int(j, "count", where);
        for (int i = 0; i < count; ++i)
            for (int k = 0; k < count; ++k) {
                Vector v(2);
                v << lo + (hi - lo) * i / (count - 1), lo + (hi - lo) * k / (count - 1);
                centers.push_back(std::move(v));
            }
        return centers;
    }
    if (kind == "ray") {
        // centers = scale * direction for each listed scale
        Vector dir = parse_vector(require(j, "direction", where), where + ".direction");
        for (const auto& s : require(j, "scales", where)) centers.push_back(s.get<double>() * dir);
        return centers;
    }
    if (kind == "line1d") {
        const double lo = require_number(j, "lo", where);
        const double hi = require_number(j, "hi", where);
        const int count = require_int(j, "count", where);
        for (int i = 0; i < count; ++i)
            centers.push_back(Vector::Constant(1, lo + (hi - lo) * i / (count - 1)));
        return centers;
    }
    if (kind == "shear_escape") {
        // far centers (a Y, Y) sweeping a in [0, horizon], plus a near anchor
        const double far = require_number(j, "far", where);
        const int count = require_int(j, "count", where);
        for (int i = 0; i <= count; ++i) {
            Vector v(2);
            v << far * (horizon * i / count), far;
            centers.push_back(std::move(v));
        }
        Vector near(2);
        near << 0.0, 50.0;
        centers.push_back(std::move(near));
        return centers;
    }
    if (kind == "rotation_edge") {
        // points along the cone edge at angle theta0, at several ranges
        const double theta0 = require_number(j, "theta0", where);
        const double far = require_number(j, "far", where);
        for (double scale : {1.0, 0.5, 0.02, 0.005}) {
            Vector v(2);
            v << far * scale * std::cos(theta0), far * scale * std::sin(theta0);
            centers.push_back(std::move(v));
        }
        return centers;
    }
    config_fail(where + ".kind", "unknown center schedule kind '" + kind + "'");
}

// FNV-1a over the raw config bytes
std::string hash_bytes(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& header) : os_(path) {
        if (!os_) throw Error("cannot open " + path.string() + " for writing");
        os_ << header << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ",";
            os_ << cells[i];
        }
        os_ << "\n";
    }

private:
    std::ofstream os_;
};

struct ExperimentOutcome {
    Json summary;
    std::string verdict = "pass";
    int exit_code = 0;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
    Json measured_constants = Json::object();
};

struct Context {
    Json scenario;
    GridSpec grid;
    EquationSpec equation;
    std::uint64_t seed = 0;
    int threads = 1;
    bool emit_fields = false;
    fs::path out_dir;
};

void maybe_warn_aliasing(const SymbolFamily& fam, const GridSpec& grid, double earliest_t,
                         ExperimentOutcome& outcome) {
    auto check = check_aliasing(fam, earliest_t, grid);
    if (!check.ok) outcome.warnings.push_back("TruncationWarning: " + check.message);
    outcome.measured_constants["aliasing_min_band_exponent"] = check.min_band_exponent;
}

Json ledger_json(const HumLedger& ledger) {
    return Json{{"lhs", ledger.lhs},
                {"rhs", ledger.rhs},
                {"cg_residual", ledger.cg_residual},
                {"iterations", ledger.iterations},
                {"certified", ledger.certified},
                {"converged", ledger.converged},
                {"stalled", ledger.stalled}};
}

// ---------------------------------------------------------------- kalman --

ExperimentOutcome run_kalman(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    auto pair = parse_matrix_pair(ctx.equation);
    auto report = analyze_hypoellipticity(pair);

    const Json& tau = require(exp, "tau_grid", "experiment");
    const double tmin = require_number(tau, "min", "experiment.tau_grid");
    const double tmax = require_number(tau, "max", "experiment.tau_grid");
    const int points = require_int(tau, "points", "experiment.tau_grid");
    std::vector<double> taus;
    for (int i = 0; i < points; ++i)
        taus.push_back(tmin * std::pow(tmax / tmin, i / static_cast<double>(points - 1)));
    auto curve = gramian_curve(pair, taus, get_int(exp, "sphere_samples", 256));

    CsvWriter csv(ctx.out_dir / "gramian.csv", "tau,value");
    for (std::size_t i = 0; i < taus.size(); ++i)
        csv.row({fmt(curve.tau_grid[i]), fmt(curve.values[i])});
    out.artifacts.push_back("gramian.csv");

    out.summary = Json{{"kalman_holds", report.kalman_holds},
                       {"rank", report.rank},
                       {"kernel_chain", report.kernel_chain},
                       {"fitted_exponent", curve.fitted_exponent},
                       {"fit_residual", curve.fit_residual}};
    if (report.k0) out.summary["k0"] = *report.k0;
    out.measured_constants["fitted_exponent"] = curve.fitted_exponent;

    if (exp.contains("expect")) {
        const Json& want = exp.at("expect");
        bool ok = true;
        if (want.contains("kalman_holds"))
            ok = ok && report.kalman_holds == want.at("kalman_holds").get<bool>();
        if (want.contains("k0"))
            ok = ok && report.k0 && *report.k0 == want.at("k0").get<int>();
        if (want.contains("exponent")) {
            const double target = want.at("exponent").get<double>();
            const double tol = get_number(want, "exponent_rel_tol", 0.05);
            ok = ok && std::abs(curve.fitted_exponent - target) <= tol * std::abs(target);
        }
        if (!ok) {
            out.verdict = "expectation-failed";
            out.exit_code = 2;
        }
    }
    return out;
}

// ------------------------------------------------------------- thickness --

ExperimentOutcome run_thickness(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    auto sup = parse_support(ctx.scenario, ctx.equation.horizon);
    const double radius = require_number(exp, "radius", "experiment");
    const long samples = static_cast<long>(require_number(exp, "samples", "experiment"));
    auto centers = parse_centers(require(exp, "centers", "experiment"), "experiment.centers",
                                 ctx.equation.horizon);
    auto profile = thickness_profile(sup, radius, centers, samples, ctx.seed, ctx.threads);

    std::string header;
    for (int i = 0; i < sup.dim(); ++i) header += "x" + std::to_string(i) + ",";
    header += "r,value,std_err,samples,seed";
    CsvWriter csv(ctx.out_dir / "thickness.csv", header);
    for (const auto& est : profile.entries) {
        std::vector<std::string> cells;
        for (int i = 0; i < sup.dim(); ++i) cells.push_back(fmt(est.center[i]));
        cells.push_back(fmt(est.radius));
        cells.push_back(fmt(est.value));
        cells.push_back(fmt(est.std_err));
        cells.push_back(std::to_string(est.samples));
        cells.push_back(std::to_string(est.seed));
        csv.row(cells);
    }
    out.artifacts.push_back("thickness.csv");

    std::vector<double> argmin_center;
    for (int i = 0; i < sup.dim(); ++i)
        argmin_center.push_back(profile.entries[profile.argmin].center[i]);
    out.summary = Json{{"min_value", profile.min_value},
                       {"argmin_center", argmin_center},
                       {"centers", centers.size()},
                       {"radius", radius}};
    out.measured_constants["thickness_min"] = profile.min_value;

    if (exp.contains("gamma_floor")) {
        const double floor_rate = exp.at("gamma_floor").get<double>();
        out.summary["gamma_floor"] = floor_rate;
        if (profile.min_value < floor_rate) {
            out.verdict = "below-gamma-floor";
            out.exit_code = 2;
        }
    }
    return out;
}

// ------------------------------------------------------------- threshold --

ExperimentOutcome run_threshold(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    const double radius = require_number(exp, "radius", "experiment");
    const double gamma_floor = require_number(exp, "gamma_floor", "experiment");
    const double t_lo = require_number(exp, "t_lo", "experiment");
    const double t_hi = require_number(exp, "t_hi", "experiment");
    const long samples = static_cast<long>(require_number(exp, "samples", "experiment"));
    const double tol = get_number(exp, "tol", 1e-2);
    const Json schedule_spec = require(exp, "schedule", "experiment");
    const Json scenario = ctx.scenario;

    auto family = [&scenario](double T) { return parse_support(scenario, T); };
    auto schedule = [&schedule_spec](double T) {
        return parse_centers(schedule_spec, "experiment.schedule", T);
    };
    const double t_star = threshold_bisect(family, schedule, radius, gamma_floor, t_lo, t_hi,
                                           samples, ctx.seed, tol, ctx.threads);

    out.summary = Json{{"t_star", t_star},
                       {"gamma_floor", gamma_floor},
                       {"radius", radius},
                       {"bisect_tol", tol}};
    out.measured_constants["t_star"] = t_star;
    if (exp.contains("expect")) {
        const Json& want = exp.at("expect");
        const double lo = require_number(want, "t_star_lo", "experiment.expect");
        const double hi = require_number(want, "t_star_hi", "experiment.expect");
        if (t_star < lo || t_star > hi) {
            out.verdict = "threshold-out-of-range";
            out.exit_code = 2;
        }
    }
    return out;
}

// ------------------------------------------------------------ synthesize --

ExperimentOutcome run_synthesize(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    auto fam = build_family(ctx.equation, ctx.equation.horizon);
    auto sup = parse_support(ctx.scenario, ctx.equation.horizon);
    auto f0 = parse_field(require(exp, "f0", "experiment"), ctx.grid, "experiment.f0");
    HumProblem prob{fam, sup, f0, require_number(exp, "epsilon", "experiment"),
                    require_number(exp, "cost_weight", "experiment"),
                    get_int(exp, "time_nodes", 64), ctx.threads};
    maybe_warn_aliasing(fam, ctx.grid, 0.0, out);

    auto sol = synthesize(prob, get_number(exp, "cg_tol", 1e-6), get_int(exp, "max_iter", 200));
    const double defect = duality_check(prob, sol, get_int(exp, "duality_probes", 20),
                                        mix_seed(ctx.seed, 77));

    auto profile = control_profile(prob, sol);
    CsvWriter csv(ctx.out_dir / "control_profile.csv", "t,weight,window_energy");
    for (const auto& s : profile) csv.row({fmt(s.t), fmt(s.weight), fmt(s.window_energy)});
    out.artifacts.push_back("control_profile.csv");

    double terminal_identity = 0.0;
    for (std::size_t i = 0; i < sol.terminal.spectral().size(); ++i)
        terminal_identity +=
            std::norm(sol.terminal.spectral()[i] + prob.epsilon * sol.h0.spectral()[i]);
    terminal_identity = std::sqrt(terminal_identity / ctx.grid.box_volume());

    out.summary = Json{{"ledger", ledger_json(sol.ledger)},
                       {"terminal_norm", sol.terminal_norm},
                       {"control_energy", sol.control_energy},
                       {"duality_defect", defect},
                       {"terminal_identity_defect", terminal_identity},
                       {"epsilon", prob.epsilon},
                       {"cost_weight", prob.cost_weight}};
    out.measured_constants["duality_defect"] = defect;

    if (ctx.emit_fields) {
        write_field_file((ctx.out_dir / "h0.bin").string(), sol.h0);
        write_field_file((ctx.out_dir / "terminal.bin").string(), sol.terminal);
        std::ofstream slice(ctx.out_dir / "h0_slice.csv");
        write_csv_slice(slice, sol.h0);
        out.artifacts.insert(out.artifacts.end(), {"h0.bin", "terminal.bin", "h0_slice.csv"});
    }

    if (!sol.ledger.certified) {
        out.verdict = "not-certified";
        out.exit_code = 2;
    }
    return out;
}

// --------------------------------------------------------------- certify --

ExperimentOutcome run_certify(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    auto fam = build_family(ctx.equation, ctx.equation.horizon);
    auto sup = parse_support(ctx.scenario, ctx.equation.horizon);
    auto f0 = parse_field(require(exp, "f0", "experiment"), ctx.grid, "experiment.f0");
    maybe_warn_aliasing(fam, ctx.grid, 0.0, out);

    std::vector<double> epsilons;
    for (const auto& e : require(exp, "epsilons", "experiment")) epsilons.push_back(e.get<double>());
    auto table = certify_uniform_cost(fam, sup, f0, epsilons,
                                      get_number(exp, "c_cap", 1099511627776.0),
                                      get_int(exp, "time_nodes", 64),
                                      get_number(exp, "cg_tol", 1e-6),
                                      get_int(exp, "max_iter", 200), ctx.threads);

    CsvWriter csv(ctx.out_dir / "certify.csv",
                  "epsilon,certified,c_found,terminal_ratio,control_energy,doubling_steps,"
                  "total_iterations,any_stall");
    Json rows = Json::array();
    bool all_certified = true;
    for (const auto& row : table) {
        csv.row({fmt(row.epsilon), row.certified ? "1" : "0", fmt(row.c_found),
                 fmt(row.terminal_ratio), fmt(row.control_energy),
                 std::to_string(row.doubling_steps), std::to_string(row.total_iterations),
                 row.any_stall ? "1" : "0"});
        rows.push_back(Json{{"epsilon", row.epsilon},
                            {"certified", row.certified},
                            {"c_found", row.c_found},
                            {"terminal_ratio", row.terminal_ratio},
                            {"control_energy", row.control_energy},
                            {"doubling_steps", row.doubling_steps},
                            {"total_iterations", row.total_iterations},
                            {"any_stall", row.any_stall}});
        all_certified = all_certified && row.certified;
    }
    out.artifacts.push_back("certify.csv");
    out.summary = Json{{"rows", rows}, {"all_certified", all_certified}};

    if (!all_certified) {
        out.verdict = "not-certified";
        out.exit_code = 2;
    }
    return out;
}

// ------------------------------------------------------------- necessity --

ExperimentOutcome run_necessity(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    auto fam = build_family(ctx.equation, ctx.equation.horizon);
    auto sup = parse_support(ctx.scenario, ctx.equation.horizon);
    const double radius = require_number(exp, "radius", "experiment");
    auto schedule = parse_centers(require(exp, "schedule", "experiment"), "experiment.schedule",
                                  ctx.equation.horizon);
    maybe_warn_aliasing(fam, ctx.grid, 0.0, out);

    std::vector<double> widths;
    if (exp.contains("l_sweep"))
        for (const auto& l : exp.at("l_sweep")) widths.push_back(l.get<double>());
    else
        widths.push_back(require_number(exp, "l", "experiment"));

    Json sweeps = Json::array();
    bool all_monotone = true;
    double worst_final_ratio = 0.0;
    for (double l : widths) {
        auto report = necessity_experiment(fam, sup, ctx.grid, l, radius, schedule,
                                           get_int(exp, "time_nodes", 64));
        const std::string csv_name = "necessity_l" + std::to_string(l) + ".csv";
        std::string header;
        for (int i = 0; i < ctx.grid.n; ++i) header += "x" + std::to_string(i) + ",";
        header += "delta_l,window_energy,tail_energy";
        CsvWriter csv(ctx.out_dir / csv_name, header);
        for (const auto& row : report.rows) {
            std::vector<std::string> cells;
            for (int i = 0; i < ctx.grid.n; ++i) cells.push_back(fmt(row.x0[i]));
            cells.push_back(fmt(row.delta_l));
            cells.push_back(fmt(row.window_energy));
            cells.push_back(fmt(row.tail_energy));
            csv.row(cells);
        }
        out.artifacts.push_back(csv_name);
        sweeps.push_back(Json{{"l", l},
                              {"delta_spread", report.delta_spread},
                              {"window_decreasing", report.window_decreasing},
                              {"final_to_initial", report.final_to_initial}});
        all_monotone = all_monotone && report.window_decreasing;
        worst_final_ratio = std::max(worst_final_ratio, report.final_to_initial);
    }
    out.summary = Json{{"sweeps", sweeps},
                       {"all_window_decreasing", all_monotone},
                       {"worst_final_to_initial", worst_final_ratio}};

    if (exp.contains("expect")) {
        const Json& want = exp.at("expect");
        bool ok = true;
        if (want.contains("window_decreasing"))
            ok = ok && all_monotone == want.at("window_decreasing").get<bool>();
        if (want.contains("max_final_ratio"))
            ok = ok && worst_final_ratio <= want.at("max_final_ratio").get<double>();
        if (!ok) {
            out.verdict = "expectation-failed";
            out.exit_code = 2;
        }
    }
    return out;
}

// ------------------------------------------------------------- bernstein --

ExperimentOutcome run_bernstein(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    auto fam = build_family(ctx.equation, ctx.equation.horizon);
    auto g = parse_field(require(exp, "g", "experiment"), ctx.grid, "experiment.g");
    const Json& sched = require(exp, "t_schedule", "experiment");
    const double tau_min = require_number(sched, "tau_min", "experiment.t_schedule");
    const double tau_max = require_number(sched, "tau_max", "experiment.t_schedule");
    const int points = require_int(sched, "points", "experiment.t_schedule");
    std::vector<double> schedule;
    for (int i = 0; i < points; ++i)
        schedule.push_back(ctx.equation.horizon -
                           tau_min * std::pow(tau_max / tau_min,
                                              i / static_cast<double>(points - 1)));
    std::sort(schedule.begin(), schedule.end());
    maybe_warn_aliasing(fam, ctx.grid, schedule.front(), out);

    auto audit = bernstein_audit(fam, g, schedule, require_int(exp, "m_max", "experiment"),
                                 require_int(exp, "alpha_max", "experiment"));

    CsvWriter csv(ctx.out_dir / "bernstein.csv", "t,m,alpha,norm,rho");
    for (const auto& row : audit.rows) {
        std::string alpha = "";
        for (std::size_t i = 0; i < row.alpha.size(); ++i)
            alpha += (i ? " " : "") + std::to_string(row.alpha[i]);
        csv.row({fmt(row.t), std::to_string(row.m), alpha, fmt(row.norm), fmt(row.rho)});
    }
    out.artifacts.push_back("bernstein.csv");

    out.summary = Json{{"c0_hat", audit.c0_hat}, {"k_fit", audit.k_fit},
                       {"k_used", audit.k_used}, {"c_hat", audit.c_hat},
                       {"s_hat", audit.s_hat}};
    out.measured_constants["c0_hat"] = audit.c0_hat;
    out.measured_constants["k_fit"] = audit.k_fit;
    out.measured_constants["c_hat"] = audit.c_hat;
    out.measured_constants["s_hat"] = audit.s_hat;

    if (exp.contains("expect")) {
        const Json& want = exp.at("expect");
        bool ok = std::isfinite(audit.c0_hat);
        if (want.contains("k")) {
            const double target = want.at("k").get<double>();
            const double tol = get_number(want, "rel_tol", 0.05);
            ok = ok && std::abs(audit.k_fit - target) <= tol * std::abs(target);
        }
        if (!ok) {
            out.verdict = "expectation-failed";
            out.exit_code = 2;
        }
    }
    return out;
}

// ------------------------------------------------------------- cylinders --

ExperimentOutcome run_cylinders(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    auto fam = build_family(ctx.equation, ctx.equation.horizon);
    auto g = parse_field(require(exp, "g", "experiment"), ctx.grid, "experiment.g");
    const double gamma = require_number(exp, "gamma", "experiment");
    const double radius = require_number(exp, "radius", "experiment");
    const int m_cap = get_int(exp, "m_cap", 4);
    const int alpha_cap = get_int(exp, "alpha_cap", 4);
    maybe_warn_aliasing(fam, ctx.grid, 0.0, out);

    std::vector<double> epsilons;
    for (const auto& e : require(exp, "epsilons", "experiment")) epsilons.push_back(e.get<double>());

    // cylinder centers on the lattice r Z^n covering the box
    std::vector<Vector> betas;
    if (ctx.grid.n == 1) {
        for (double beta = -ctx.grid.half_width; beta <= ctx.grid.half_width + 1e-12;
             beta += radius)
            betas.push_back(Vector::Constant(1, beta));
    } else {
        for (double bx = -ctx.grid.half_width; bx <= ctx.grid.half_width + 1e-12; bx += radius)
            for (double by = -ctx.grid.half_width; by <= ctx.grid.half_width + 1e-12;
                 by += radius) {
                Vector v(2);
                v << bx, by;
                betas.push_back(std::move(v));
            }
    }

    Json per_epsilon = Json::array();
    bool all_bounded = true;
    for (double eps : epsilons) {
        auto cls = classify_cylinders(fam, gamma, eps, g, radius, betas, m_cap, alpha_cap,
                                      get_int(exp, "time_nodes", 32));
        const std::string csv_name = "cylinders_eps" + std::to_string(eps) + ".csv";
        std::string header;
        for (int i = 0; i < ctx.grid.n; ++i) header += "beta" + std::to_string(i) + ",";
        header += "good,bound_ratio,energy,witness_m,witness_alpha";
        CsvWriter csv(ctx.out_dir / csv_name, header);
        int bad_count = 0;
        for (const auto& rep : cls.reports) {
            std::vector<std::string> cells;
            for (int i = 0; i < ctx.grid.n; ++i) cells.push_back(fmt(rep.beta[i]));
            cells.push_back(rep.good ? "1" : "0");
            cells.push_back(fmt(rep.bound_ratio));
            cells.push_back(fmt(rep.energy));
            cells.push_back(std::to_string(rep.witness_m));
            std::string walpha;
            for (std::size_t i = 0; i < rep.witness_alpha.size(); ++i)
                walpha += (i ? " " : "") + std::to_string(rep.witness_alpha[i]);
            cells.push_back(walpha);
            csv.row(cells);
            if (!rep.good) ++bad_count;
        }
        out.artifacts.push_back(csv_name);
        per_epsilon.push_back(Json{{"epsilon", eps},
                                   {"bad_energy", cls.bad_energy},
                                   {"good_energy", cls.good_energy},
                                   {"total_energy", cls.total_energy},
                                   {"datum_norm_sq", cls.datum_norm_sq},
                                   {"bad_count", bad_count},
                                   {"bad_energy_bounded", cls.bad_energy_bounded},
                                   {"c0_hat", cls.c0_hat},
                                   {"c_t_hat", cls.c_t_hat},
                                   {"k_hat", cls.k_hat},
                                   {"t_gamma", cls.t_gamma},
                                   {"m_cap", cls.m_cap},
                                   {"alpha_cap", cls.alpha_cap}});
        all_bounded = all_bounded && cls.bad_energy_bounded;
        out.measured_constants["c0_hat"] = cls.c0_hat;
        out.measured_constants["c_t_hat"] = cls.c_t_hat;
        out.measured_constants["k_hat"] = cls.k_hat;
        out.measured_constants["s_hat"] = cls.s_hat;
    }
    out.summary = Json{{"per_epsilon", per_epsilon}, {"all_bad_energy_bounded", all_bounded}};
    if (!all_bounded) {
        out.verdict = "bad-energy-bound-violated";
        out.exit_code = 2;
    }
    return out;
}

// ------------------------------------------------------------------- fdb --

ExperimentOutcome run_fdb(const Context& ctx, const Json& exp) {
    ExperimentOutcome out;
    const int m_max = get_int(exp, "m_max", 12);
    const int a_min = get_int(exp, "a_min", 1);
    const int a_max = get_int(exp, "a_max", 8);

    CsvWriter csv(ctx.out_dir / "fdb_identity.csv", "m,a,partition_sum,closed_form,equal");
    bool all_equal = true;
    for (int m = 1; m <= m_max; ++m) {
        for (int a = a_min; a <= a_max; ++a) {
            const Rational lhs = faa_di_bruno_sum(m, Rational(a));
            const Rational rhs = rising_factorial_form(m, Rational(a));
            const bool equal = lhs == rhs;
            all_equal = all_equal && equal;
            csv.row({std::to_string(m), std::to_string(a), lhs.str(), rhs.str(),
                     equal ? "1" : "0"});
        }
    }
    out.artifacts.push_back("fdb_identity.csv");

    // cross-check the multiplier-derivative recurrence against the explicit
    // partition expansion on the three built-in families
    const double T = 1.3;
    std::vector<std::pair<std::string, SymbolFamily>> fams;
    fams.emplace_back("heat", SymbolFamily::heat(Matrix::Identity(2, 2), T));
    Matrix q(2, 2), b(2, 2);
    q << 0, 0, 0, 1;
    b << 0, 1, 0, 0;
    fams.emplace_back("ou", SymbolFamily::ou_reduction(MatrixPair::make(q, b), T));
    fams.emplace_back("fractional", SymbolFamily::fractional(0.5, T, 2));

    double worst_rel = 0.0;
    std::uint64_t state = mix_seed(ctx.seed, 0xFDB);
    auto next_uniform = [&state] {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        return ((state * 0x2545F4914F6CDD1Dull) >> 11) * 0x1.0p-53;
    };
    const int mult_m_max = get_int(exp, "multiplier_m_max", 6);
    for (auto& [name, fam] : fams) {
        for (int m = 1; m <= mult_m_max; ++m) {
            for (int trial = 0; trial < 10; ++trial) {
                const double t = 0.1 + (T - 0.2) * next_uniform();
                Vector xi(2);
                xi << 4.0 * next_uniform() - 2.0, 4.0 * next_uniform() - 2.0;
                const double via_rec = fam.multiplier_derivative(t, xi, m);
                const double via_fdb = faa_di_bruno_multiplier_derivative(fam, t, xi, m);
                const double scale = std::max({std::abs(via_rec), std::abs(via_fdb), 1e-300});
                worst_rel = std::max(worst_rel, std::abs(via_rec - via_fdb) / scale);
            }
        }
    }

    out.summary = Json{{"identity_rows", m_max * (a_max - a_min + 1)},
                       {"all_equal", all_equal},
                       {"multiplier_check_max_rel_err", worst_rel},
                       {"multiplier_m_max", mult_m_max}};
    if (!all_equal || worst_rel > 1e-9) {
        out.verdict = "identity-failed";
        out.exit_code = 2;
    }
    return out;
}

} // namespace

RunResult run_scenario_file(const std::string& path, const RunOptions& opts) {
    const auto start = std::chrono::steady_clock::now();

    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open scenario file: " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    const std::string bytes = buffer.str();

    Json scenario;
    try {
        scenario = Json::parse(bytes);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("scenario JSON parse failure: ") + e.what());
    }

    Context ctx;
    ctx.scenario = scenario;
    const std::string name = require_string(scenario, "name", "scenario");
    ctx.equation = parse_equation_spec(scenario);
    ctx.grid = parse_grid(scenario);
    ctx.seed = opts.seed_override ? *opts.seed_override
                                  : static_cast<std::uint64_t>(
                                        require_number(scenario, "seed", "scenario"));
    ctx.threads = std::max(1, opts.threads);
    ctx.emit_fields = opts.emit_fields;

    std::string out_dir = opts.output_dir;
    if (out_dir.empty())
        out_dir = scenario.contains("output_dir") ? scenario.at("output_dir").get<std::string>()
                                                  : "runs/" + name;
    ctx.out_dir = out_dir;
    fs::create_directories(ctx.out_dir);

    const Json& exp = require(scenario, "experiment", "scenario");
    const std::string kind = require_string(exp, "kind", "experiment");

    ExperimentOutcome outcome;
    try {
        if (kind == "kalman")
            outcome = run_kalman(ctx, exp);
        else if (kind == "thickness")
            outcome = run_thickness(ctx, exp);
        else if (kind == "threshold")
            outcome = run_threshold(ctx, exp);
        else if (kind == "synthesize")
            outcome = run_synthesize(ctx, exp);
        else if (kind == "certify")
            outcome = run_certify(ctx, exp);
        else if (kind == "necessity")
            outcome = run_necessity(ctx, exp);
        else if (kind == "bernstein")
            outcome = run_bernstein(ctx, exp);
        else if (kind == "cylinders")
            outcome = run_cylinders(ctx, exp);
        else if (kind == "fdb")
            outcome = run_fdb(ctx, exp);
        else
            config_fail("experiment.kind", "unknown experiment kind '" + kind + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw Error("scenario '" + name + "' (" + kind + "): " + e.what());
    }

    Json summary = Json{{"name", name},
                        {"experiment", kind},
                        {"verdict", outcome.verdict},
                        {"seed", ctx.seed},
                        {"results", outcome.summary}};
    {
        std::ofstream os(ctx.out_dir / "summary.json");
        os << summary.dump(2) << "\n";
    }

    const auto end = std::chrono::steady_clock::now();
    Json ledger = Json{
        {"config_hash", hash_bytes(bytes)},
        {"seed", ctx.seed},
        {"tool_version", kToolVersion},
        {"wall_time_sec", std::chrono::duration<double>(end - start).count()},
        {"threads", ctx.threads},
        {"warnings", outcome.warnings},
        {"measured_constants", outcome.measured_constants},
    };
    {
        std::ofstream os(ctx.out_dir / "run_ledger.json");
        os << ledger.dump(2) << "\n";
    }

    RunResult result;
    result.exit_code = outcome.exit_code;
    result.verdict = outcome.verdict;
    result.output_dir = ctx.out_dir.string();
    result.artifacts = outcome.artifacts;
    result.artifacts.push_back("summary.json");
    result.artifacts.push_back("run_ledger.json");
    return result;
}

std::vector<ScenarioInfo> list_scenarios(const std::string& dir) {
    std::vector<ScenarioInfo> infos;
    if (!fs::is_directory(dir)) throw Error("scenario directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream is(file);
        Json j;
        try {
            is >> j;
        } catch (const std::exception&) {
            continue;
        }
        ScenarioInfo info;
        info.file = file.string();
        info.name = j.contains("name") ? j.at("name").get<std::string>() : file.stem().string();
        info.description =
            j.contains("description") ? j.at("description").get<std::string>() : "";
        if (j.contains("experiment") && j.at("experiment").contains("kind"))
            info.experiment = j.at("experiment").at("kind").get<std::string>();
        infos.push_back(std::move(info));
    }
    return infos;
}

} // namespace ouctrl
