#include "commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rdelab/analysis.hpp"
#include "rdelab/distiter.hpp"
#include "rdelab/errors.hpp"
#include "rdelab/rng.hpp"
#include "rdelab/simulate.hpp"
#include "rdelab/version.hpp"

namespace rdelab::cli {

namespace {

Json effective_config(const RunConfig& rc) {
  Json eff = rc.config;
  if (rc.seed) eff["seed"] = *rc.seed;
  if (rc.tol) eff["tol"] = *rc.tol;
  return eff;
}

// The spec lives under "spec"; a config that is itself a spec is accepted
// as well.
OffspringSpec read_spec(const Json& cfg) {
  if (cfg.contains("spec")) return spec_from_json(cfg.at("spec"));
  if (cfg.contains("kind")) return spec_from_json(cfg);
  throw ValidationError("config: missing 'spec'");
}

std::int64_t get_int(const Json& cfg, const char* key, std::int64_t def, std::int64_t lo,
                     std::int64_t hi) {
  if (!cfg.contains(key)) return def;
  const Json& v = cfg.at(key);
  if (!v.is_number_integer())
    throw ValidationError(std::string("config: '") + key + "' must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > hi)
    throw ValidationError(std::string("config: '") + key + "' = " + std::to_string(x) +
                          " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return x;
}

double get_double(const Json& cfg, const char* key, double def) {
  if (!cfg.contains(key)) return def;
  const Json& v = cfg.at(key);
  if (!v.is_number()) throw ValidationError(std::string("config: '") + key + "' must be a number");
  return v.get<double>();
}

bool get_bool(const Json& cfg, const char* key, bool def) {
  if (!cfg.contains(key)) return def;
  const Json& v = cfg.at(key);
  if (!v.is_boolean()) throw ValidationError(std::string("config: '") + key + "' must be a boolean");
  return v.get<bool>();
}

double resolve_tol(const RunConfig& rc, double def) {
  const double tol = rc.tol ? *rc.tol : get_double(rc.config, "tol", def);
  if (!(tol > 0.0) || !std::isfinite(tol)) throw ValidationError("config: tol must be > 0");
  return tol;
}

std::uint64_t require_seed(const RunConfig& rc) {
  if (rc.seed) return *rc.seed;
  if (rc.config.contains("seed")) {
    const Json& v = rc.config.at("seed");
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ValidationError("config: 'seed' must be a non-negative integer");
  }
  throw ValidationError("a seed is required (--seed N or config 'seed')");
}

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json header(const char* command, const RunConfig& rc, const OffspringSpec& spec) {
  const Json eff = effective_config(rc);
  return {{"command", command},
          {"version", kVersion},
          {"config_hash", config_hash(eff)},
          {"spec", spec_to_json(spec)},
          {"spec_description", spec.describe()}};
}

Json check_entry(const char* name, double estimate, double target, double se) {
  const double diff = estimate - target;
  const bool ok = std::abs(diff) <= 3.0 * se + 1e-12;
  return {{"quantity", name},
          {"estimate", num(estimate)},
          {"target", num(target)},
          {"se", num(se)},
          {"z", se > 0.0 ? num(diff / se) : Json(nullptr)},
          {"within_3se", ok}};
}

Json moment_check_json(const MomentCheck& c) {
  return {{"max_residual", num(c.max_residual)},
          {"nonincreasing", c.nonincreasing},
          {"power_bound", c.power_bound},
          {"min_scaled_difference", num(c.min_scaled_difference)},
          {"completely_monotone", c.completely_monotone}};
}

const char* cycle_structure(const CycleScan& s) {
  if (s.neutral_continuum) return "NeutralContinuum";
  return s.cycles.empty() ? "None" : "TwoCycles";
}

std::string trajectory_csv(const std::vector<TrajectoryRecord>& traj) {
  std::ostringstream os;
  os << "k,m1,m2,r,E,kolmogorov\n";
  auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
  for (const auto& t : traj)
    os << t.k << ',' << format_double(t.m1) << ',' << format_double(t.m2) << ',' << opt(t.r) << ','
       << opt(t.e) << ',' << opt(t.kolmogorov) << '\n';
  return os.str();
}

EmpiricalDist initial_distribution(const Json& cfg, double mu1, std::size_t size, RngStream& rng) {
  Json init = cfg.contains("initial") ? cfg.at("initial") : Json("mean-matched-uniform");
  if (init.is_string()) init = Json{{"kind", init.get<std::string>()}};
  if (!init.is_object() || !init.contains("kind") || !init.at("kind").is_string())
    throw ValidationError("config: 'initial' must be a string or an object with 'kind'");
  const auto kind = init.at("kind").get<std::string>();
  if (kind == "mean-matched-uniform")
    return mean_matched_uniform(get_double(init, "mean", mu1), size, rng);
  if (kind == "point-mass") {
    if (!init.contains("x")) throw ValidationError("config: point-mass needs 'x'");
    return EmpiricalDist::point_mass(get_double(init, "x", 0.0), size);
  }
  if (kind == "bernoulli") return bernoulli_sample(get_double(init, "p", mu1), size, rng);
  if (kind == "points-csv") {
    if (!init.contains("path") || !init.at("path").is_string())
      throw ValidationError("config: points-csv needs a string 'path'");
    return EmpiricalDist::load_csv(init.at("path").get<std::string>());
  }
  throw ValidationError("config: unknown initial distribution '" + kind + "'");
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

std::string config_hash(const Json& effective) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : effective.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CommandOutput cmd_analyze(const RunConfig& rc) {
  const auto spec = read_spec(rc.config);
  spec.require_branching();
  const Pgf pgf(spec);
  const double tol = resolve_tol(rc, 1e-12);
  const int K = static_cast<int>(get_int(rc.config, "K", 8, 1, kMaxMomentOrder));
  const int grid = static_cast<int>(get_int(rc.config, "grid", 1001, 3, kMaxGrid));

  Json rep = header("analyze", rc, spec);
  rep["parameters"] = {{"K", K}, {"grid", grid}, {"tol", tol}};
  const auto fp = analyze_fixed_point(pgf, tol);
  rep["fixed_point"] = to_json(fp);
  rep["endogeny"] = to_string(fp.endogeny);
  rep["critical"] = fp.critical;

  Json moments = Json::object();
  const auto disc = moment_sequence(pgf, MomentKind::Discrete, K, tol);
  moments["discrete"] = to_json(disc);
  moments["discrete"]["check"] = moment_check_json(check_moment_sequence(pgf, disc.values));
  try {
    const auto endo = moment_sequence(pgf, MomentKind::Endogenous, K, tol);
    moments["endogenous"] = to_json(endo);
    moments["endogenous"]["check"] = moment_check_json(check_moment_sequence(pgf, endo.values));
  } catch (const FeasibilityError& e) {
    moments["endogenous"] = {{"kind", "Endogenous"}, {"error", e.what()}, {"order", e.order()}};
  }
  rep["moments"] = moments;

  const auto scan = find_two_cycles(pgf, grid, tol);
  rep["cycles"] = to_json(scan);
  rep["cycle_structure"] = cycle_structure(scan);

  rep["residuals"] = {
      {"mu1", num(std::abs(pgf.eval(fp.mu1) + fp.mu1 - 1.0))},
      {"mu2", num(std::abs(pgf.eval(fp.mu2) - fp.mu2 - (1.0 - 2.0 * fp.mu1)))},
  };
  if (rc.config.contains("perron_n")) {
    const int n = static_cast<int>(get_int(rc.config, "perron_n", 2, 1, 1'000'000));
    const auto pr = perron_rho(pgf, n);
    rep["perron"] = {{"n", n}, {"rho", num(pr.rho)}, {"n_star", pr.n_star},
                     {"d_rho", num(pr.d_rho)}, {"mu1_n", num(pr.mu1_n)}};
  }
  return {rep, {}};
}

CommandOutput cmd_simulate(const RunConfig& rc) {
  const auto spec = read_spec(rc.config);
  spec.require_branching();
  const Pgf pgf(spec);
  const std::uint64_t seed = require_seed(rc);
  const int depth = static_cast<int>(get_int(rc.config, "depth", kDefaultBoundaryDepth, 0, kMaxDepth));
  const std::int64_t reps = get_int(rc.config, "reps", 100'000, 100, kMaxReps);
  SimOptions opt;
  opt.node_cap = static_cast<std::size_t>(
      get_int(rc.config, "node_cap", static_cast<std::int64_t>(kDefaultNodeCap), 1,
              static_cast<std::int64_t>(kDefaultNodeCap)));
  opt.budget = get_int(rc.config, "budget", kDefaultExplorationBudget, 1, 1'000'000'000);
  const bool trace = get_bool(rc.config, "trace", false);

  const double mu1 = solve_mu1(pgf);
  const double mu2 = solve_mu2(pgf, mu1);
  const auto recs = run_replicates(spec, depth, reps, seed, mu1, true, opt);
  const auto mom = summarize_moments(recs, depth);
  const auto diag = summarize_diagnostic(recs, depth);

  Json rep = header("simulate", rc, spec);
  rep["seed"] = seed;
  rep["parameters"] = {{"depth", depth}, {"reps", reps}, {"node_cap", opt.node_cap},
                       {"budget", opt.budget}};
  rep["analytic"] = {{"mu1", num(mu1)}, {"mu2", num(mu2)}, {"mu1_minus_mu2", num(mu1 - mu2)}};
  rep["mc_moments"] = to_json(mom);
  rep["endogeny_diagnostic"] = to_json(diag);
  Json checks = Json::array({
      check_entry("mean_C", mom.mean_c, mu1, mom.se_mean),
      check_entry("m2_C", mom.m2_c, mu2, mom.se_m2),
      check_entry("e_c_one_minus_c", diag.e_c_one_minus_c, mu1 - mu2, diag.se_e),
      check_entry("p_disagree", diag.p_disagree, 2.0 * (mu1 - mu2), diag.se_p),
  });
  Json flags = Json::array();
  for (const auto& c : checks)
    if (!c.at("within_3se").get<bool>()) flags.push_back(c.at("quantity"));
  rep["checks"] = checks;
  rep["agreement"] = flags.empty();
  rep["flags"] = flags;

  CommandOutput out{rep, {}};
  if (trace && rc.has_out_dir) {
    std::ostringstream os;
    os << "rep,root_C,root_S,depth\n";
    for (std::size_t r = 0; r < recs.size(); ++r)
      os << r << ',' << format_double(recs[r].root_c) << ',' << format_double(recs[r].root_s) << ','
         << depth << '\n';
    out.files.emplace_back("simulate_trace.csv", os.str());
    out.report["trace_file"] = "simulate_trace.csv";
  }
  return out;
}

CommandOutput cmd_iterate(const RunConfig& rc) {
  const auto spec = read_spec(rc.config);
  spec.require_branching();
  const Pgf pgf(spec);
  const std::uint64_t seed = require_seed(rc);
  const double tol = resolve_tol(rc, 1e-6);
  const int steps = static_cast<int>(get_int(rc.config, "steps", 30, 1, kMaxSteps));
  const auto size = static_cast<std::size_t>(
      get_int(rc.config, "sample_size", static_cast<std::int64_t>(kDefaultSampleSize), 1,
              kMaxSampleSize));
  IterateOptions opt;
  opt.anchor_mean = get_bool(rc.config, "anchor_mean", true);
  opt.budget = get_int(rc.config, "budget", kDefaultExplorationBudget, 1, 1'000'000'000);

  const double mu1 = solve_mu1(pgf);
  if (rc.config.contains("target")) {
    const Json& t = rc.config.at("target");
    if (t == "discrete") {
      opt.target = DiscreteTarget{mu1};
    } else if (t.is_object() && t.value("kind", "") == "points-csv" && t.contains("path") &&
               t.at("path").is_string()) {
      opt.target = EmpiricalDist::load_csv(t.at("path").get<std::string>());
    } else {
      throw ValidationError("config: 'target' must be \"discrete\" or a points-csv object");
    }
  }

  RngStream rng(seed);
  const auto nu0 = initial_distribution(rc.config, mu1, size, rng);
  const auto res = basin_test(nu0, spec, steps, tol, rng, opt);
  const auto recursion =
      moment_recursions(pgf, nu0.mean(), nu0.second_moment(), nu0.mean() * mu1, mu1, steps);

  Json rep = header("iterate", rc, spec);
  rep["seed"] = seed;
  rep["parameters"] = {{"steps", steps}, {"sample_size", size}, {"tol", tol},
                       {"anchor_mean", opt.anchor_mean}};
  rep["mu1"] = num(res.mu1);
  rep["mu2"] = num(res.mu2);
  rep["stable"] = res.stable;
  rep["initial"] = {{"mean", num(res.mean0)},
                    {"second_moment", num(nu0.second_moment())},
                    {"discrete_concentrated", res.discrete_concentrated}};
  rep["analytic_verdict"] = to_string(res.analytic);
  rep["empirical_verdict"] = to_string(res.empirical);
  if (res.stable) rep["mean_basin"] = to_string(res.mean_basin);
  const auto& traj = res.trajectory;
  rep["final"] = {{"m1", num(traj.back().m1)},
                  {"m2", num(traj.back().m2)},
                  {"m1_previous", num(traj[traj.size() - 2].m1)},
                  {"se_m1", num(traj.back().se_m1)},
                  {"se_m2", num(traj.back().se_m2)}};
  Json tj = Json::array();
  for (const auto& t : traj) tj.push_back(to_json(t));
  rep["trajectory"] = tj;
  Json rj = Json::array();
  for (const auto& t : recursion) rj.push_back(to_json(t));
  rep["recursion"] = rj;

  CommandOutput out{rep, {}};
  if (rc.has_out_dir) {
    out.files.emplace_back("iterate_trajectory.csv", trajectory_csv(traj));
    out.files.emplace_back("iterate_recursion.csv", trajectory_csv(recursion));
  }
  return out;
}

CommandOutput cmd_transform(const RunConfig& rc) {
  const Json& cfg = rc.config;
  OffspringSpec spec = [&] {
    if (cfg.contains("base") && cfg.contains("p"))
      return OffspringSpec::thinned(spec_from_json(cfg.at("base")), get_double(cfg, "p", 0.5));
    return read_spec(cfg);
  }();
  if (!spec.is<OffspringSpec::Thinned>())
    throw ValidationError("transform needs a thinned spec (or 'base' and 'p')");
  const Pgf pgf(spec);
  const auto& th = std::get<OffspringSpec::Thinned>(spec.variant());
  const int points = static_cast<int>(get_int(cfg, "grid", 101, 2, kMaxGrid));

  std::ostringstream os;
  os << "z,H,H_prime,residual\n";
  double max_res = 0.0;
  for (int i = 0; i < points; ++i) {
    const double z = static_cast<double>(i) / (points - 1);
    const double h = pgf.eval(z);
    double hp = std::numeric_limits<double>::quiet_NaN();
    if (i == points - 1) {
      hp = pgf.deriv_at_one();
    } else {
      try {
        hp = pgf.deriv(z);
      } catch (const DomainError&) {
      }
    }
    const double res = pgf.thinning_residual(z);
    max_res = std::max(max_res, res);
    os << format_double(z) << ',' << format_double(h) << ',' << format_double(hp) << ','
       << format_double(res) << '\n';
  }

  Json rep = header("transform", rc, spec);
  rep["p"] = th.p;
  rep["base"] = spec_to_json(*th.base);
  rep["defect"] = num(pgf.defect());
  rep["non_defective"] = pgf.defect() <= 1e-12;
  rep["max_residual"] = num(max_res);
  rep["grid_points"] = points;
  CommandOutput out{rep, {}};
  out.files.emplace_back("transform_table.csv", os.str());
  out.report["table_file"] = "transform_table.csv";
  return out;
}

CommandOutput cmd_cycles(const RunConfig& rc) {
  const auto spec = read_spec(rc.config);
  spec.require_branching();
  const Pgf pgf(spec);
  const double tol = resolve_tol(rc, 1e-12);
  const int grid = static_cast<int>(get_int(rc.config, "grid", 1001, 3, kMaxGrid));
  const bool monte_carlo = rc.config.contains("half_depth");

  const auto scan = find_two_cycles(pgf, grid, tol);
  Json rep = header("cycles", rc, spec);
  rep["parameters"] = {{"grid", grid}, {"tol", tol}};
  rep["fixed_point"] = num(scan.fixed_point);
  rep["neutral_continuum"] = scan.neutral_continuum;
  rep["max_deviation"] = num(scan.max_deviation);
  rep["cycle_structure"] = cycle_structure(scan);

  int half_depth = 0;
  std::int64_t reps = 0;
  std::uint64_t seed = 0;
  if (monte_carlo) {
    half_depth = static_cast<int>(get_int(rc.config, "half_depth", 3, 0, kMaxDepth / 2));
    reps = get_int(rc.config, "reps", 10'000, 100, kMaxReps);
    seed = require_seed(rc);
    rep["seed"] = seed;
    rep["parameters"]["half_depth"] = half_depth;
    rep["parameters"]["reps"] = reps;
  }

  Json cycles = Json::array();
  for (const auto& c : scan.cycles) {
    Json cj = to_json(c);
    cj["iterated_stable"] = iterated_stability(c, pgf);
    const auto im = iterated_mu2_plus(pgf, c, tol);
    cj["iterated_mu2_plus"] = num(im.mu2_plus);
    cj["degenerate"] = im.degenerate;
    if (monte_carlo) {
      const auto mc = iterated_conditional(spec, c, half_depth, reps, seed);
      cj["monte_carlo"] = to_json(mc);
    }
    cycles.push_back(cj);
  }
  rep["cycles"] = cycles;
  return {rep, {}};
}

}  // namespace rdelab::cli
