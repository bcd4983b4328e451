#include "tailbound/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>

#include <CLI11.hpp>

#include "tailbound/bounds.hpp"
#include "tailbound/csv.hpp"

namespace tailbound::cli {

namespace {

using nlohmann::json;

// ---- config parsing ------------------------------------------------------

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError(where + ": unknown field \"" + item.key() + "\"");
}

const json& need(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key))
        throw ConfigError(where + ": missing field \"" + key + "\"");
    return j.at(key);
}

double num_at(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number())
        throw ConfigError(where + ": field \"" + key + "\" must be a number");
    return v.get<double>();
}

double num_or(const json& j, const char* key, double dflt, const std::string& where) {
    return j.contains(key) ? num_at(j, key, where) : dflt;
}

std::uint64_t u64_at(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError(where + ": field \"" + key + "\" must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::uint64_t u64_or(const json& j, const char* key, std::uint64_t dflt,
                     const std::string& where) {
    return j.contains(key) ? u64_at(j, key, where) : dflt;
}

int int_at(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number_integer())
        throw ConfigError(where + ": field \"" + key + "\" must be an integer");
    return v.get<int>();
}

std::vector<double> vec_at(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_array())
        throw ConfigError(where + ": field \"" + key + "\" must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) {
        if (!e.is_number())
            throw ConfigError(where + ": field \"" + key + "\" must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

void require_increasing(const std::vector<double>& v, const std::string& what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw ConfigError(what + " must be finite");
        if (i && !(v[i] > v[i - 1]))
            throw ConfigError(what + " must be strictly increasing");
    }
}

CertifyBlock parse_certify(const json& j, double a) {
    reject_unknown(j, {"epsilons", "grid", "tolerance", "sub", "super"}, "certify");
    CertifyBlock b;
    b.epsilons = vec_at(j, "epsilons", "certify");
    if (b.epsilons.empty())
        throw ConfigError("certify: \"epsilons\" must be nonempty");
    for (double e : b.epsilons)
        if (!std::isfinite(e) || !(e > 0.0))
            throw ConfigError("certify: every epsilon must be positive and finite");
    if (j.contains("sub")) b.run_sub = j.at("sub").get<bool>();
    if (j.contains("super")) b.run_super = j.at("super").get<bool>();
    if (!b.run_sub && !b.run_super)
        throw ConfigError("certify: at least one of \"sub\", \"super\" must stay enabled");
    if (b.run_super)
        for (double e : b.epsilons)
            if (e >= a)
                throw ConfigError("certify: epsilon " + csv::cell(e) + " >= a = " +
                                  csv::cell(a) +
                                  ", so the supermartingale plateau a - epsilon would not "
                                  "be positive; lower it or set \"super\": false");
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        reject_unknown(g, {"t_floor", "t_max", "points"}, "certify.grid");
        b.grid.t_floor = num_or(g, "t_floor", b.grid.t_floor, "certify.grid");
        b.grid.t_max = num_or(g, "t_max", b.grid.t_max, "certify.grid");
        b.grid.points = g.contains("points") ? int_at(g, "points", "certify.grid")
                                             : b.grid.points;
        if (!(b.grid.t_floor > 0.0))
            throw ConfigError("certify.grid: \"t_floor\" must be positive");
        if (b.grid.t_max != 0.0 && !(b.grid.t_max > b.grid.t_floor))
            throw ConfigError("certify.grid: \"t_max\" must be 0 (auto) or above t_floor");
        if (b.grid.points < 2)
            throw ConfigError("certify.grid: \"points\" must be at least 2");
    }
    b.tolerance = num_or(j, "tolerance", b.tolerance, "certify");
    if (!(b.tolerance > 0.0))
        throw ConfigError("certify: \"tolerance\" must be positive");
    return b;
}

BoundsBlock parse_bounds(const json& j) {
    reject_unknown(j, {"x_grid", "ci_level", "epsilon", "r_grid"}, "bounds");
    BoundsBlock b;
    b.x_grid = vec_at(j, "x_grid", "bounds");
    if (b.x_grid.empty())
        throw ConfigError("bounds: \"x_grid\" must be nonempty");
    require_increasing(b.x_grid, "bounds: \"x_grid\"");
    b.ci_level = num_or(j, "ci_level", b.ci_level, "bounds");
    if (!(b.ci_level > 0.5) || !(b.ci_level < 1.0))
        throw ConfigError("bounds: \"ci_level\" must lie in (0.5, 1)");
    if (j.contains("epsilon")) {
        const double e = num_at(j, "epsilon", "bounds");
        if (!std::isfinite(e) || !(e > 0.0))
            throw ConfigError("bounds: \"epsilon\" must be positive and finite");
        b.epsilon = e;
    }
    if (j.contains("r_grid")) {
        b.r_grid = vec_at(j, "r_grid", "bounds");
        if (b.r_grid.empty())
            throw ConfigError("bounds: \"r_grid\" must be nonempty when given");
        require_increasing(b.r_grid, "bounds: \"r_grid\"");
        if (b.r_grid.front() < 0.0)
            throw ConfigError("bounds: \"r_grid\" entries must be nonnegative");
    } else {
        for (int k = 0; k <= 64; ++k) b.r_grid.push_back(0.25 * k);
    }
    return b;
}

SimulateBlock parse_simulate(const json& j, bool have_seed_override) {
    reject_unknown(j,
                   {"steps", "burn_in", "replicas", "cycles", "seed", "x_grid",
                    "cycle_cap", "drift_states", "drift_draws"},
                   "simulate");
    SimulateBlock b;
    b.steps = u64_at(j, "steps", "simulate");
    b.burn_in = u64_or(j, "burn_in", 0, "simulate");
    if (!(b.steps > b.burn_in))
        throw ConfigError("simulate: \"steps\" must exceed \"burn_in\"");
    b.replicas = int_at(j, "replicas", "simulate");
    if (b.replicas < 2)
        throw ConfigError("simulate: \"replicas\" = " + std::to_string(b.replicas) +
                          " leaves the confidence interval undefined; need at least 2");
    b.cycles = u64_at(j, "cycles", "simulate");
    if (b.cycles < 2)
        throw ConfigError("simulate: \"cycles\" must be at least 2");
    if (j.contains("seed")) b.seed = u64_at(j, "seed", "simulate");
    if (!b.seed && !have_seed_override)
        throw ConfigError("simulate: \"seed\" is required (or pass --seed)");
    b.x_grid = vec_at(j, "x_grid", "simulate");
    if (b.x_grid.empty())
        throw ConfigError("simulate: \"x_grid\" must be nonempty");
    require_increasing(b.x_grid, "simulate: \"x_grid\"");
    b.cycle_cap = u64_or(j, "cycle_cap", b.cycle_cap, "simulate");
    if (b.cycle_cap < 1)
        throw ConfigError("simulate: \"cycle_cap\" must be positive");
    b.drift_states =
        j.contains("drift_states") ? int_at(j, "drift_states", "simulate") : b.drift_states;
    if (b.drift_states < 2)
        throw ConfigError("simulate: \"drift_states\" must be at least 2");
    b.drift_draws = u64_or(j, "drift_draws", b.drift_draws, "simulate");
    if (b.drift_draws < 100)
        throw ConfigError("simulate: \"drift_draws\" must be at least 100");
    return b;
}

DiagnoseBlock parse_diagnose(const json& j) {
    reject_unknown(j, {"t_grid", "longtail_y"}, "diagnose");
    DiagnoseBlock b;
    b.t_grid = vec_at(j, "t_grid", "diagnose");
    if (b.t_grid.empty())
        throw ConfigError("diagnose: \"t_grid\" must be nonempty");
    require_increasing(b.t_grid, "diagnose: \"t_grid\"");
    if (!(b.t_grid.front() > 0.0))
        throw ConfigError("diagnose: \"t_grid\" entries must be positive");
    b.longtail_y = num_or(j, "longtail_y", b.longtail_y, "diagnose");
    if (!std::isfinite(b.longtail_y) || !(b.longtail_y > 0.0))
        throw ConfigError("diagnose: \"longtail_y\" must be positive and finite");
    return b;
}

// ---- artifact plumbing ---------------------------------------------------

std::string eps_tag(double eps) { return csv::cell(eps); }

std::string cert_file(potential::CertKind kind, double eps) {
    return "cert_" + potential::kind_name(kind) + "_" + eps_tag(eps) + ".json";
}

std::string margin_file(potential::CertKind kind, double eps) {
    return "margin_" + potential::kind_name(kind) + "_" + eps_tag(eps) + ".csv";
}

std::string failure_file(potential::CertKind kind, double eps) {
    return "certify_failure_" + potential::kind_name(kind) + "_" + eps_tag(eps) + ".csv";
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << j.dump(2) << '\n';
    f.flush();
    if (!f) throw IoError("short write to " + path.string());
}

// Pipeline input: absence means the producing command has not run.
json read_artifact_json(const std::filesystem::path& path, const std::string& who,
                        const std::string& producer) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw DependencyError(who + ": missing required artifact " + path.string() +
                              "; run " + producer + " first");
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw DependencyError(who + ": cannot parse " + path.string() + ": " + e.what());
    }
}

potential::Certificate load_certificate(const std::filesystem::path& dir,
                                        potential::CertKind kind, double eps,
                                        const IncrementModel& m, const std::string& who) {
    const auto path = dir / cert_file(kind, eps);
    auto cert = potential::Certificate::from_json(read_artifact_json(path, who, "certify"));
    if (cert.kind != kind)
        throw DependencyError(who + ": " + path.string() + " holds a " +
                              potential::kind_name(cert.kind) + " certificate");
    if (cert.model != m.to_json())
        throw DependencyError(who + ": certificate " + path.string() +
                              " was produced for a different model");
    return cert;
}

std::string utc_now() {
    const std::time_t tt = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Timestamps live here and only here; every other artifact is a pure function
// of config + inputs, so reruns are byte-identical.
void write_metadata(const std::filesystem::path& dir, const std::string& started) {
    write_json_file(dir / "run_metadata.json",
                    json{{"started_utc", started}, {"finished_utc", utc_now()}});
}

}  // namespace

double one_sided_z(double level) {
    if (!(level > 0.5) || !(level < 1.0))
        throw ParameterError("one_sided_z: level must lie in (0.5, 1)");
    const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---- commands ------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j, bool have_seed_override) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    reject_unknown(j, {"model", "out", "certify", "bounds", "simulate", "diagnose"},
                   "config");
    ExperimentConfig cfg;
    cfg.model_json = need(j, "model", "config");
    const IncrementModel m = IncrementModel::from_json(cfg.model_json);
    if (j.contains("out")) {
        if (!j.at("out").is_string())
            throw ConfigError("config: \"out\" must be a string");
        cfg.out_dir = j.at("out").get<std::string>();
    }
    if (j.contains("certify")) cfg.certify = parse_certify(j.at("certify"), m.moments().a);
    if (j.contains("bounds")) cfg.bounds = parse_bounds(j.at("bounds"));
    if (j.contains("simulate")) cfg.simulate = parse_simulate(j.at("simulate"), have_seed_override);
    if (j.contains("diagnose")) cfg.diagnose = parse_diagnose(j.at("diagnose"));
    if (cfg.bounds && !cfg.bounds->epsilon && !cfg.certify)
        throw ConfigError("bounds: no \"epsilon\" given and no certify block to take "
                          "one from");
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path,
                                        bool have_seed_override) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config file " + path.string() + ": " + e.what());
    }
    return from_json(j, have_seed_override);
}

int cmd_certify(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.certify) throw ConfigError("certify: config has no \"certify\" block");
    const CertifyBlock& blk = *cfg.certify;
    const IncrementModel m = cfg.model();

    std::vector<potential::CertKind> kinds;
    if (blk.run_sub) kinds.push_back(potential::CertKind::sub);
    if (blk.run_super) kinds.push_back(potential::CertKind::super);

    for (double eps : blk.epsilons) {
        for (auto kind : kinds) {
            try {
                const auto result = kind == potential::CertKind::sub
                                        ? certify_sub(m, eps, blk.grid, blk.tolerance)
                                        : certify_super(m, eps, blk.grid, blk.tolerance);
                write_json_file(opts.out / cert_file(kind, eps), result.cert.to_json());
                csv::Table t;
                t.header = {"t", "drift", "potential", "margin"};
                for (const auto& p : result.curve)
                    t.rows.push_back({csv::cell(p.t), csv::cell(p.drift),
                                      csv::cell(p.potential), csv::cell(p.margin)});
                csv::write(opts.out / margin_file(kind, eps), t);
                std::cout << "certified " << potential::kind_name(kind)
                          << " epsilon=" << eps_tag(eps) << ": R=" << csv::cell(result.cert.R)
                          << " min_margin=" << csv::cell(result.cert.min_margin) << '\n';
            } catch (const CertificationError& e) {
                csv::Table t;
                t.header = {"t", "value", "reference"};
                for (const auto& p : e.curve)
                    t.rows.push_back(
                        {csv::cell(p.t), csv::cell(p.value), csv::cell(p.reference)});
                const auto path = opts.out / failure_file(kind, eps);
                csv::write(path, t);
                std::cerr << "certification failed for " << potential::kind_name(kind)
                          << " epsilon=" << eps_tag(eps) << ": " << e.what()
                          << "\n  worst point: t=" << csv::cell(e.worst_t)
                          << " value=" << csv::cell(e.worst_value)
                          << "\n  diagnostic curve: " << path.string() << '\n';
                return 3;
            }
        }
    }
    return 0;
}

int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.simulate) throw ConfigError("simulate: config has no \"simulate\" block");
    const SimulateBlock& blk = *cfg.simulate;
    const std::uint64_t seed = opts.seed ? *opts.seed : *blk.seed;
    const IncrementModel m = cfg.model();

    // Regeneration cycles.
    const auto cycles =
        walk_sim::sample_cycles(m, blk.cycles, seed, blk.cycle_cap, opts.threads);
    walk_sim::write_cycles(opts.out / "cycles.bin", cycles);

    std::optional<std::string> truncation_failure;
    try {
        walk_sim::require_truncation_ok(cycles);
    } catch (const StatCheckError& e) {
        truncation_failure = e.what();
    }

    const auto stats = walk_sim::tau_stats(cycles, m);
    const double wald_allowance = stats.stau_ci + m.moments().a * stats.tau_ci;
    const bool wald_ok = stats.wald_residual <= wald_allowance;

    write_json_file(opts.out / "cycle_stats.json",
                    json{{"n_requested", blk.cycles},
                         {"n_used", stats.n_used},
                         {"n_truncated", stats.n_truncated},
                         {"cycle_cap", blk.cycle_cap},
                         {"truncated_fraction", walk_sim::truncated_fraction(cycles)},
                         {"truncation_ok", !truncation_failure},
                         {"tau_mean", stats.tau_mean},
                         {"tau_ci", stats.tau_ci},
                         {"stau_mean", stats.stau_mean},
                         {"stau_ci", stats.stau_ci},
                         {"wald_residual", stats.wald_residual},
                         {"wald_allowance", wald_allowance},
                         {"wald_ok", wald_ok},
                         {"seed", seed}});

    {
        csv::Table t;
        t.header = {"x", "p_hat", "ci_halfwidth"};
        for (double x : blk.x_grid) {
            const auto pt = walk_sim::mtau_tail(cycles, x);
            t.rows.push_back({csv::cell(x), csv::cell(pt.p_hat), csv::cell(pt.ci_halfwidth)});
        }
        csv::write(opts.out / "mtau.csv", t);
    }

    // Stationary Lindley tail.
    const auto lindley = walk_sim::lindley_tail(m, blk.x_grid, blk.steps, blk.burn_in,
                                                blk.replicas, seed, opts.threads);
    {
        csv::Table t;
        t.header = {"x", "p_hat", "ci_halfwidth"};
        for (std::size_t j = 0; j < lindley.x_grid.size(); ++j)
            t.rows.push_back({csv::cell(lindley.x_grid[j]), csv::cell(lindley.p_hat[j]),
                              csv::cell(lindley.ci_halfwidth[j])});
        csv::write(opts.out / "lindley.csv", t);
    }

    // Live drift re-check of every certificate the certify block names.
    std::vector<std::string> drift_failures;
    if (cfg.certify) {
        csv::Table t;
        t.header = {"kind",   "epsilon", "t",       "mc_drift", "mc_se",
                    "quad_drift", "margin", "sign_ok", "quad_ok"};
        std::vector<potential::CertKind> kinds;
        if (cfg.certify->run_sub) kinds.push_back(potential::CertKind::sub);
        if (cfg.certify->run_super) kinds.push_back(potential::CertKind::super);
        for (double eps : cfg.certify->epsilons) {
            for (auto kind : kinds) {
                const auto cert = load_certificate(opts.out, kind, eps, m, "simulate");
                const auto report = walk_sim::empirical_drift_check(
                    m, cert, blk.drift_states, blk.drift_draws, seed, opts.threads);
                for (const auto& row : report.rows)
                    t.rows.push_back({potential::kind_name(kind), eps_tag(eps),
                                      csv::cell(row.t), csv::cell(row.mc_drift),
                                      csv::cell(row.mc_se), csv::cell(row.quad_drift),
                                      csv::cell(row.margin), csv::cell(row.sign_ok),
                                      csv::cell(row.quad_ok)});
                if (!report.ok) {
                    std::string which = potential::kind_name(kind) + " epsilon=" + eps_tag(eps);
                    if (!report.violations.empty())
                        which += " at t=" + csv::cell(report.violations.front()) +
                                 (report.violations.size() > 1
                                      ? " (+" + std::to_string(report.violations.size() - 1) +
                                            " more)"
                                      : "");
                    drift_failures.push_back(std::move(which));
                }
            }
        }
        csv::write(opts.out / "drift_check.csv", t);
    } else {
        std::cerr << "simulate: no certify block in config, drift re-check skipped\n";
    }

    std::cout << "simulated " << blk.cycles << " cycles and " << blk.replicas << "x"
              << blk.steps << " stationary steps (seed " << seed << ")\n";

    // Gates, after every artifact is on disk for post-mortem.
    if (truncation_failure) throw StatCheckError(*truncation_failure);
    if (!wald_ok)
        throw StatCheckError("simulate: Wald residual " + csv::cell(stats.wald_residual) +
                             " exceeds the combined 99% allowance " +
                             csv::cell(wald_allowance));
    if (!drift_failures.empty()) {
        std::string msg = "simulate: live drift re-check flagged ";
        for (std::size_t i = 0; i < drift_failures.size(); ++i)
            msg += (i ? "; " : "") + drift_failures[i];
        throw StatCheckError(msg);
    }
    return 0;
}

int cmd_bounds(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.bounds) throw ConfigError("bounds: config has no \"bounds\" block");
    const BoundsBlock& blk = *cfg.bounds;
    const IncrementModel m = cfg.model();
    const double eps = blk.epsilon ? *blk.epsilon : cfg.certify->epsilons.front();

    const auto sub = load_certificate(opts.out, potential::CertKind::sub, eps, m, "bounds");
    const auto super =
        load_certificate(opts.out, potential::CertKind::super, eps, m, "bounds");

    const json stats =
        read_artifact_json(opts.out / "cycle_stats.json", "bounds", "simulate");
    if (!stats.value("truncation_ok", false))
        throw DependencyError("bounds: cycle_stats.json records a failed truncation "
                              "check; rerun simulate");
    const double tau_mean = stats.at("tau_mean").get<double>();
    const double tau_ci = stats.at("tau_ci").get<double>();
    const double z = one_sided_z(blk.ci_level);
    const double tau_upper = tau_mean + z * (tau_ci / walk_sim::z99_two_sided);

    const auto cycles_path = opts.out / "cycles.bin";
    if (!std::filesystem::exists(cycles_path))
        throw DependencyError("bounds: missing required artifact " + cycles_path.string() +
                              "; run simulate first");
    const auto cycles = walk_sim::read_cycles(cycles_path);
    std::vector<double> stau;
    stau.reserve(cycles.size());
    for (const auto& c : cycles)
        if (!c.truncated) stau.push_back(c.s_tau);

    const auto lindley_path = opts.out / "lindley.csv";
    if (!std::filesystem::exists(lindley_path))
        throw DependencyError("bounds: missing required artifact " + lindley_path.string() +
                              "; run simulate first");
    const auto lt = csv::read(lindley_path);
    if (lt.header != std::vector<std::string>{"x", "p_hat", "ci_halfwidth"})
        throw DependencyError("bounds: " + lindley_path.string() +
                              " has unexpected columns");
    walk_sim::LindleyEstimate est;
    for (const auto& row : lt.rows) {
        est.x_grid.push_back(csv::to_double(row[0], "lindley.csv x"));
        est.p_hat.push_back(csv::to_double(row[1], "lindley.csv p_hat"));
        est.ci_halfwidth.push_back(csv::to_double(row[2], "lindley.csv ci_halfwidth"));
    }
    if (est.x_grid.empty())
        throw DependencyError("bounds: " + lindley_path.string() + " has no rows");
    const auto upper_curve = walk_sim::upper_confidence_curve(est, z);

    // Candidate levels below the simulated grid are unusable: there the
    // interpolant extends flat and stops being an upper bound.
    std::vector<double> r_grid;
    for (double r : blk.r_grid)
        if (r >= est.x_grid.front()) r_grid.push_back(r);
    const std::size_t r_dropped = blk.r_grid.size() - r_grid.size();
    if (r_grid.empty())
        throw DependencyError("bounds: every r candidate lies below the simulated grid; "
                              "extend simulate.x_grid down to 0 or raise bounds.r_grid");
    const auto rc = bounds::choose_r(
        m, super, [&](double r) { return upper_curve(r); }, r_grid);

    std::optional<bounds::LundbergBaseline> light;
    if (m.has_mgf()) light = bounds::lundberg(m, stau);

    bounds::BoundInputs in;
    in.sub = &sub;
    in.super = &super;
    in.r = rc.r;
    in.tau_mean = tau_mean;
    in.tau_mean_upper = tau_upper;
    in.stau_samples = stau;
    in.light_tail = light ? &*light : nullptr;
    const auto table = bounds::build_bound_table(m, blk.x_grid, in);

    csv::Table t;
    t.header = {"x",          "lower_M",    "upper_M",    "fkz_lower", "asymp_M",
                "lower_Mtau", "upper_Mtau", "asymp_Mtau", "doob",      "note"};
    for (const auto& row : table.rows)
        t.rows.push_back({csv::cell(row.x), csv::cell(row.lower_M), csv::cell(row.upper_M),
                          csv::cell(row.fkz_lower), csv::cell(row.asymp_M),
                          csv::cell(row.lower_Mtau), csv::cell(row.upper_Mtau),
                          csv::cell(row.asymp_Mtau), csv::cell(row.doob), row.note});
    csv::write(opts.out / "bounds.csv", t);

    json prov = table.provenance;
    prov["cli"] = {{"epsilon", eps},
                   {"ci_level", blk.ci_level},
                   {"one_sided_z", z},
                   {"r", rc.r},
                   {"r_threshold", rc.threshold},
                   {"r_candidates", r_grid.size()},
                   {"r_candidates_dropped_below_grid", r_dropped},
                   {"tau_mean", tau_mean},
                   {"tau_mean_upper", tau_upper},
                   {"inputs",
                    {{"cert_sub", cert_file(potential::CertKind::sub, eps)},
                     {"cert_super", cert_file(potential::CertKind::super, eps)},
                     {"cycle_stats", "cycle_stats.json"},
                     {"cycles", "cycles.bin"},
                     {"lindley", "lindley.csv"}}}};
    write_json_file(opts.out / "bounds_provenance.json", prov);

    std::cout << "bound table over " << blk.x_grid.size() << " x values (epsilon="
              << eps_tag(eps) << ", r=" << csv::cell(rc.r) << ")\n";
    return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.diagnose) throw ConfigError("diagnose: config has no \"diagnose\" block");
    const DiagnoseBlock& blk = *cfg.diagnose;
    const IncrementModel m = cfg.model();
    const double two_a_plus = 2.0 * m.moments().a_plus;

    csv::Table t;
    t.header = {"t",
                "sstar_ratio",
                "sstar_ref",
                "subexp_ratio",
                "subexp_ref_truncated",
                "subexp_ref_full",
                "longtail_ratio",
                "longtail_ref"};
    std::size_t trimmed = 0;
    double first_trimmed = 0.0;
    for (double tt : blk.t_grid) {
        try {
            const double s = potential::sstar_ratio(m, tt);
            const double se = potential::subexp_ratio(m, tt);
            const double lt = potential::longtail_ratio(m, tt, blk.longtail_y);
            t.rows.push_back({csv::cell(tt), csv::cell(s), csv::cell(two_a_plus),
                              csv::cell(se), csv::cell(1.0), csv::cell(2.0), csv::cell(lt),
                              csv::cell(1.0)});
        } catch (const DomainError&) {
            if (trimmed == 0) first_trimmed = tt;
            ++trimmed;
        }
    }
    csv::write(opts.out / "diagnostics.csv", t);
    if (trimmed)
        std::cerr << "warning: diagnose: trimmed " << trimmed << " of "
                  << blk.t_grid.size() << " grid points past tail underflow (first at t="
                  << csv::cell(first_trimmed) << ")\n";
    std::cout << "diagnostic curves at " << t.rows.size() << " t values\n";
    return 0;
}

// ---- entry point ---------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"tail bounds for negative-drift random walks, certified by "
                 "martingale potentials"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    int threads = 0;
    std::uint64_t seed_flag = 0;

    const auto add = [&](const char* name, const char* desc) {
        CLI::App* s = app.add_subcommand(name, desc);
        s->add_option("--config", config_path, "experiment config (JSON)")->required();
        s->add_option("--out", out_flag, "output directory (default: \"out\" in config)");
        s->add_option("--threads", threads, "worker thread cap, 0 = all hardware threads");
        s->add_option("--seed", seed_flag, "override the simulate seed");
        return s;
    };

    CLI::App* c_certify =
        add("certify", "establish sub/supermartingale certificates for the model");
    CLI::App* c_bounds =
        add("bounds", "assemble the certified bound table from earlier artifacts");
    CLI::App* c_simulate =
        add("simulate", "Monte Carlo estimates: cycles, stationary tail, drift re-check");
    CLI::App* c_diagnose = add("diagnose", "tail-class diagnostic ratio curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    // All four subcommands share the option targets, so any bound seed option
    // tells us whether --seed was typed.
    bool have_seed = false;
    for (const CLI::App* s : {c_certify, c_bounds, c_simulate, c_diagnose})
        if (s->parsed() && s->count("--seed") > 0) have_seed = true;

    try {
        ExperimentConfig cfg = ExperimentConfig::load(config_path, have_seed);
        RunOptions opts;
        opts.threads = threads;
        if (have_seed) opts.seed = seed_flag;
        if (!out_flag.empty())
            opts.out = out_flag;
        else if (cfg.out_dir)
            opts.out = *cfg.out_dir;
        else
            throw ConfigError("no output directory: pass --out or set \"out\" in the config");
        std::error_code ec;
        std::filesystem::create_directories(opts.out, ec);
        if (ec)
            throw IoError("cannot create output directory " + opts.out.string() + ": " +
                          ec.message());

        int (*fn)(const ExperimentConfig&, const RunOptions&) = nullptr;
        if (c_certify->parsed()) fn = cmd_certify;
        if (c_bounds->parsed()) fn = cmd_bounds;
        if (c_simulate->parsed()) fn = cmd_simulate;
        if (c_diagnose->parsed()) fn = cmd_diagnose;

        const std::string started = utc_now();
        int code = 1;
        try {
            code = fn(cfg, opts);
        } catch (...) {
            try {
                write_metadata(opts.out, started);
            } catch (...) {
            }
            throw;
        }
        write_metadata(opts.out, started);
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const CertificationError& e) {
        std::cerr << "certification failure: " << e.what() << '\n';
        return 3;
    } catch (const NoExponentError& e) {
        std::cerr << "certification failure: " << e.what() << '\n';
        return 3;
    } catch (const NoRootError& e) {
        std::cerr << "certification failure: " << e.what() << '\n';
        return 3;
    } catch (const StatCheckError& e) {
        std::cerr << "statistical check failed: " << e.what() << '\n';
        return 4;
    } catch (const DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace tailbound::cli
