#include "rdelab/json_io.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <string>

#include "rdelab/errors.hpp"

namespace rdelab {

namespace {

const Json& field(const Json& j, const char* name) {
  if (!j.contains(name)) throw ValidationError(std::string("spec: missing field '") + name + "'");
  return j.at(name);
}

double number(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number()) throw ValidationError(std::string("spec: '") + name + "' must be a number");
  return v.get<double>();
}

// Non-finite values have no JSON literal; emit null.
Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

OffspringSpec spec_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("spec: expected a JSON object");
  const Json& kind_v = field(j, "kind");
  if (!kind_v.is_string()) throw ValidationError("spec: 'kind' must be a string");
  const auto kind = kind_v.get<std::string>();

  if (kind == "deterministic") {
    const Json& d = field(j, "d");
    if (!d.is_number_integer()) throw ValidationError("spec: 'd' must be an integer");
    return OffspringSpec::deterministic(d.get<int>());
  }
  if (kind == "geometric") return OffspringSpec::geometric(number(j, "alpha"));
  if (kind == "finite") {
    const Json& pmf = field(j, "pmf");
    if (!pmf.is_object()) throw ValidationError("spec: 'pmf' must be an object");
    std::map<long, double> masses;
    for (const auto& [key, val] : pmf.items()) {
      long k = 0;
      const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), k);
      if (ec != std::errc{} || ptr != key.data() + key.size())
        throw ValidationError("spec: pmf key '" + key + "' is not an integer");
      if (k < 1) throw ValidationError("spec: pmf key '" + key + "' must be >= 1 (no mass at zero)");
      if (k > 1'000'000) throw ValidationError("spec: pmf key '" + key + "' is too large");
      if (!val.is_number()) throw ValidationError("spec: pmf value for '" + key + "' must be a number");
      masses[k] = val.get<double>();
    }
    std::vector<double> weights(masses.empty() ? 0 : static_cast<std::size_t>(masses.rbegin()->first), 0.0);
    for (const auto& [k, p] : masses) weights[static_cast<std::size_t>(k - 1)] = p;
    const double inf_mass = j.contains("infinity_mass") ? number(j, "infinity_mass") : 0.0;
    return OffspringSpec::finite(std::move(weights), inf_mass);
  }
  if (kind == "thinned") {
    const double p = number(j, "p");
    return OffspringSpec::thinned(spec_from_json(field(j, "base")), p);
  }
  throw ValidationError("spec: unknown kind '" + kind + "'");
}

Json spec_to_json(const OffspringSpec& spec) {
  const auto& v = spec.variant();
  if (const auto* d = std::get_if<OffspringSpec::Deterministic>(&v))
    return {{"kind", "deterministic"}, {"d", d->d}};
  if (const auto* g = std::get_if<OffspringSpec::Geometric>(&v))
    return {{"kind", "geometric"}, {"alpha", g->alpha}};
  if (const auto* f = std::get_if<OffspringSpec::FinitePmf>(&v)) {
    Json pmf = Json::object();
    for (std::size_t k = 0; k < f->weights.size(); ++k)
      if (f->weights[k] != 0.0) pmf[std::to_string(k + 1)] = f->weights[k];
    return {{"kind", "finite"}, {"pmf", pmf}, {"infinity_mass", f->infinity_mass}};
  }
  const auto& t = std::get<OffspringSpec::Thinned>(v);
  return {{"kind", "thinned"}, {"p", t.p}, {"base", spec_to_json(*t.base)}};
}

Json to_json(const FixedPointReport& r) {
  return {{"mu1", num(r.mu1)},
          {"mu_star", num(r.mu_star)},
          {"h_prime_mu1", num(r.h_prime_mu1)},
          {"mu2", num(r.mu2)},
          {"endogeny", to_string(r.endogeny)},
          {"critical", r.critical}};
}

Json to_json(const MomentSequence& m) {
  Json vals = Json::array();
  for (double x : m.values) vals.push_back(num(x));
  return {{"kind", to_string(m.kind)}, {"values", vals}};
}

Json to_json(const TwoCycle& c) {
  return {{"mu_plus", num(c.mu_plus)},
          {"mu_minus", num(c.mu_minus)},
          {"stability_product", num(c.stability_product)},
          {"stable", c.stable}};
}

Json to_json(const CycleScan& s) {
  Json cycles = Json::array();
  for (const auto& c : s.cycles) cycles.push_back(to_json(c));
  return {{"fixed_point", num(s.fixed_point)},
          {"neutral_continuum", s.neutral_continuum},
          {"max_deviation", num(s.max_deviation)},
          {"cycles", cycles}};
}

Json to_json(const McMoments& m) {
  return {{"mean_C", num(m.mean_c)}, {"m2_C", num(m.m2_c)},     {"se_mean", num(m.se_mean)},
          {"se_m2", num(m.se_m2)},   {"reps", m.reps},          {"depth", m.depth}};
}

Json to_json(const EndogenyDiagnostic& d) {
  return {{"e_c_one_minus_c", num(d.e_c_one_minus_c)},
          {"se_e", num(d.se_e)},
          {"p_disagree", num(d.p_disagree)},
          {"se_p", num(d.se_p)},
          {"reps", d.reps},
          {"depth", d.depth}};
}

Json to_json(const TrajectoryRecord& t) {
  auto opt = [](const std::optional<double>& x) { return x ? num(*x) : Json(nullptr); };
  return {{"k", t.k},         {"m1", num(t.m1)},   {"m2", num(t.m2)},
          {"r", opt(t.r)},    {"E", opt(t.e)},     {"kolmogorov", opt(t.kolmogorov)},
          {"se_m1", num(t.se_m1)}, {"se_m2", num(t.se_m2)}};
}

}  // namespace rdelab
