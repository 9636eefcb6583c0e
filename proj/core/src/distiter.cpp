#include "rdelab/distiter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>

#include "rdelab/errors.hpp"
#include "rdelab/parallel.hpp"

namespace rdelab {

namespace {

constexpr std::size_t kChunk = 8192;

double mean_of_powers(const std::vector<double>& xs, int power) {
  double s = 0.0;
  for (double x : xs) s += power == 1 ? x : x * x;
  return s / static_cast<double>(xs.size());
}

double se_of_powers(const std::vector<double>& xs, int power) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  // Shifted by the first value so a constant sample gives exactly 0.
  const double x0 = power == 1 ? xs[0] : xs[0] * xs[0];
  double s = 0.0, ss = 0.0;
  for (double x : xs) {
    const double d = (power == 1 ? x : x * x) - x0;
    s += d;
    ss += d * d;
  }
  const double nn = static_cast<double>(n);
  const double var = std::max(0.0, (ss - s * s / nn) / (nn - 1.0));
  return std::sqrt(var / nn);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

TrajectoryRecord describe(int k, const EmpiricalDist& nu, const IterateTarget& target) {
  TrajectoryRecord rec;
  rec.k = k;
  rec.m1 = nu.mean();
  rec.m2 = nu.second_moment();
  rec.se_m1 = nu.se_mean();
  rec.se_m2 = nu.se_second_moment();
  if (const auto* s = std::get_if<EmpiricalDist>(&target)) {
    rec.kolmogorov = kolmogorov_distance(nu, *s);
  } else if (const auto* d = std::get_if<DiscreteTarget>(&target)) {
    rec.kolmogorov = kolmogorov_to_discrete(nu, d->mu1);
  }
  return rec;
}

}  // namespace

// ---- EmpiricalDist ----

EmpiricalDist::EmpiricalDist(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw ValidationError("empirical distribution needs at least one point");
  for (double x : points_)
    if (!(x >= 0.0 && x <= 1.0))
      throw ValidationError("point " + std::to_string(x) + " lies outside [0, 1]");
}

EmpiricalDist EmpiricalDist::point_mass(double x, std::size_t size) {
  return EmpiricalDist(std::vector<double>(size, x));
}

EmpiricalDist EmpiricalDist::read_csv(std::istream& in) {
  std::vector<double> pts;
  std::string line;
  std::size_t lineno = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma != std::string::npos) line = trim(line.substr(0, comma));
    const auto v = parse_double(line);
    if (!v) {
      if (!seen_data && pts.empty() && lineno == 1) continue;  // header
      throw ValidationError("line " + std::to_string(lineno) + ": not a number: '" + line + "'");
    }
    seen_data = true;
    pts.push_back(*v);
  }
  return EmpiricalDist(std::move(pts));
}

EmpiricalDist EmpiricalDist::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read points file '" + path + "'");
  try {
    return read_csv(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

double EmpiricalDist::mean() const { return mean_of_powers(points_, 1); }
double EmpiricalDist::second_moment() const { return mean_of_powers(points_, 2); }
double EmpiricalDist::se_mean() const { return se_of_powers(points_, 1); }
double EmpiricalDist::se_second_moment() const { return se_of_powers(points_, 2); }

bool anchor_mean(EmpiricalDist& nu, double target) {
  auto& xs = nu.points_;
  const double n = static_cast<double>(xs.size());
  double ones = 0.0, zeros = 0.0;
  for (double x : xs) {
    ones += x == 1.0;
    zeros += x == 0.0;
  }
  // x^g with g in (0, inf) reaches means strictly between these limits.
  const double lo = ones / n, hi = 1.0 - zeros / n;
  if (!(target > lo && target < hi)) return false;

  // Safeguarded Newton on u = log g; the mean is decreasing in u.
  auto eval = [&](double u, double& deriv) {
    const double g = std::exp(u);
    double s = 0.0, ds = 0.0;
    for (double x : xs) {
      if (x == 0.0 || x == 1.0) {
        s += x;
        continue;
      }
      const double p = std::pow(x, g);
      s += p;
      ds += p * std::log(x);
    }
    deriv = g * ds / n;
    return s / n - target;
  };
  double a = -60.0, b = 60.0, u = 0.0, d = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double f = eval(u, d);
    if (f == 0.0) break;
    (f > 0.0 ? a : b) = u;
    double next = d < 0.0 ? u - f / d : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - u) <= 1e-15 * std::max(1.0, std::abs(u)) || b - a <= 1e-15) {
      u = next;
      break;
    }
    u = next;
  }
  const double g = std::exp(u);
  for (double& x : xs)
    if (x != 0.0 && x != 1.0) x = std::pow(x, g);
  return true;
}

EmpiricalDist mean_matched_uniform(double mean, std::size_t size, RngStream& rng) {
  if (!(mean > 0.0 && mean < 1.0)) throw ValidationError("target mean must lie in (0, 1)");
  if (size == 0) throw ValidationError("sample size must be >= 1");
  std::vector<double> pts(size);
  for (auto& x : pts) x = rng.uniform_pos();
  EmpiricalDist nu(std::move(pts));
  if (!anchor_mean(nu, mean)) throw ValidationError("cannot match the target mean");
  return nu;
}

EmpiricalDist bernoulli_sample(double p, std::size_t size, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p must lie in [0, 1]");
  if (size == 0) throw ValidationError("sample size must be >= 1");
  std::vector<double> pts(size);
  for (auto& x : pts) x = rng.bernoulli(p) ? 1.0 : 0.0;
  return EmpiricalDist(std::move(pts));
}

bool is_discrete_concentrated(const EmpiricalDist& nu) {
  std::size_t inner = 0;
  for (double x : nu.points()) inner += std::min(x, 1.0 - x) > 1e-9;
  return static_cast<double>(inner) <= 1e-3 * static_cast<double>(nu.size());
}

// ---- T ----

EmpiricalDist apply_T(const EmpiricalDist& nu, const OffspringSpec& spec, RngStream& rng,
                      std::size_t out_size, std::int64_t budget) {
  if (out_size == 0) throw ValidationError("out_size must be >= 1");
  if (nu.size() == 0) throw ValidationError("input distribution is empty");
  const FamilySampler sampler(spec, budget);
  const std::uint64_t base = rng();
  const auto& in = nu.points();
  std::vector<double> out(out_size);
  const std::size_t chunks = (out_size + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c) {
      RngStream local(base, c);
      const std::size_t end = std::min(out_size, (c + 1) * kChunk);
      for (std::size_t i = c * kChunk; i < end; ++i) {
        const FamilySize n = sampler(local);
        if (n.is_infinite()) {
          out[i] = 1.0;
          continue;
        }
        double prod = 1.0;
        for (std::int64_t j = 0; j < n.count; ++j) prod *= in[local.index(in.size())];
        out[i] = 1.0 - prod;
      }
    }
  });
  return EmpiricalDist(std::move(out));
}

double kolmogorov_distance(const EmpiricalDist& a, const EmpiricalDist& b, int quantiles) {
  if (quantiles < 1) throw ValidationError("quantiles must be >= 1");
  std::vector<double> sa = a.points(), sb = b.points();
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  auto ecdf = [](const std::vector<double>& s, double x) {
    return static_cast<double>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) /
           static_cast<double>(s.size());
  };
  auto quantile = [&](const std::vector<double>& s, int j) {
    const double p = static_cast<double>(j) / (quantiles + 1);
    auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(s.size())));
    return s[std::min(s.size() - 1, idx == 0 ? 0 : idx - 1)];
  };
  double d = 0.0;
  for (int j = 1; j <= quantiles; ++j) {
    for (double x : {quantile(sa, j), quantile(sb, j)}) d = std::max(d, std::abs(ecdf(sa, x) - ecdf(sb, x)));
  }
  return d;
}

double kolmogorov_to_discrete(const EmpiricalDist& a, double mu1) {
  // The CDF of Bernoulli(mu1) is 1 - mu1 on [0, 1); the sample CDF is
  // monotone there, so the sup is attained at 0 or just below 1.
  std::size_t at_zero = 0, below_one = 0;
  for (double x : a.points()) {
    at_zero += x <= 0.0;
    below_one += x < 1.0;
  }
  const double n = static_cast<double>(a.size());
  const double q = 1.0 - mu1;
  return std::max(std::abs(at_zero / n - q), std::abs(below_one / n - q));
}

std::vector<TrajectoryRecord> iterate_T(const EmpiricalDist& nu0, const OffspringSpec& spec,
                                        int steps, RngStream& rng, const IterateOptions& opt,
                                        EmpiricalDist* final_dist) {
  if (steps < 1) throw ValidationError("steps must be >= 1");
  spec.validate();
  const Pgf pgf(spec);
  const std::size_t m = opt.out_size == 0 ? nu0.size() : opt.out_size;
  std::vector<TrajectoryRecord> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(describe(0, nu0, opt.target));
  EmpiricalDist cur = nu0;
  for (int k = 1; k <= steps; ++k) {
    const double target_mean = mean_map(pgf, cur.mean());
    EmpiricalDist next = apply_T(cur, spec, rng, m, opt.budget);
    if (opt.anchor_mean) anchor_mean(next, target_mean);
    cur = std::move(next);
    out.push_back(describe(k, cur, opt.target));
  }
  if (final_dist) *final_dist = std::move(cur);
  return out;
}

std::vector<TrajectoryRecord> moment_recursions(const Pgf& pgf, double m1_0, double m2_0,
                                                double r_0, double mu1, int steps) {
  for (double v : {m1_0, m2_0, r_0, mu1})
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("recursion seeds must lie in [0, 1]");
  if (m2_0 > m1_0 + 1e-15) throw ValidationError("m2_0 must not exceed m1_0");
  if (steps < 0) throw ValidationError("steps must be >= 0");
  const double mu2 = solve_mu2(pgf, mu1);
  const double h_mu1 = pgf.eval(mu1);
  std::vector<TrajectoryRecord> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  double m1 = m1_0, m2 = m2_0, r = r_0;
  for (int k = 0;; ++k) {
    TrajectoryRecord rec;
    rec.k = k;
    rec.m1 = m1;
    rec.m2 = m2;
    rec.r = r;
    rec.e = m2 - 2.0 * r + mu2;
    out.push_back(rec);
    if (k == steps) break;
    const double h1 = pgf.eval(m1);
    const double n1 = 1.0 - h1;
    const double n2 = 1.0 - 2.0 * h1 + pgf.eval(m2);
    const double nr = 1.0 - h_mu1 - h1 + pgf.eval(r);
    m1 = std::clamp(n1, 0.0, 1.0);
    m2 = std::clamp(n2, 0.0, 1.0);
    r = std::clamp(nr, 0.0, 1.0);
  }
  return out;
}

BasinTestResult basin_test(const EmpiricalDist& nu0, const OffspringSpec& spec, int steps,
                           double tol, RngStream& rng, const IterateOptions& opt) {
  if (!(tol > 0.0)) throw ValidationError("tol must be > 0");
  spec.require_branching();
  const Pgf pgf(spec);
  BasinTestResult res;
  res.mean0 = nu0.mean();
  res.discrete_concentrated = is_discrete_concentrated(nu0);
  res.mu1 = solve_mu1(pgf);
  res.mu2 = solve_mu2(pgf, res.mu1);
  const auto cls = classify_endogeny(pgf);
  res.stable = cls.endogeny == Endogeny::Endogenous;

  if (res.stable) {
    res.mean_basin = basin_of_mean(pgf, res.mean0, 10000, tol).kind;
    res.analytic =
        res.mean_basin == BasinKind::ToMu1 ? BasinVerdict::InBasin : BasinVerdict::NotInBasin;
  } else {
    const double d = std::abs(res.mean0 - res.mu1);
    if (d < tol) {
      res.analytic =
          res.discrete_concentrated ? BasinVerdict::NotInBasin : BasinVerdict::InBasin;
    } else if (d <= 10.0 * tol) {
      res.analytic = BasinVerdict::Boundary;
    } else {
      res.analytic = BasinVerdict::NotInBasin;
    }
  }

  res.trajectory = iterate_T(nu0, spec, steps, rng, opt);
  const auto& last = res.trajectory.back();
  const bool m1_ok = std::abs(last.m1 - res.mu1) <= 4.0 * last.se_m1 + tol;
  const bool m2_ok = std::abs(last.m2 - res.mu2) <= 4.0 * last.se_m2 + tol;
  res.empirical = m1_ok && m2_ok ? BasinVerdict::InBasin : BasinVerdict::NotInBasin;
  return res;
}

const char* to_string(BasinVerdict v) {
  switch (v) {
    case BasinVerdict::InBasin: return "InBasin";
    case BasinVerdict::NotInBasin: return "NotInBasin";
    case BasinVerdict::Boundary: return "Boundary";
  }
  return "?";
}

}  // namespace rdelab
