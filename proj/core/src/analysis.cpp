#include "rdelab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rdelab/errors.hpp"
#include "rdelab/roots.hpp"

namespace rdelab {

namespace {

constexpr double kNeutralThreshold = 1e-9;
constexpr double kEndpointStep = 1e-6;

double safe_deriv(const Pgf& pgf, double s) {
  try {
    return pgf.deriv(s);
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// sum_{k<n} C(n,k) (-1)^k m_k
double moment_rhs(const std::vector<double>& m, int n) {
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += binomial(n, k) * ((k % 2) ? -1.0 : 1.0) * m[k];
  return acc;
}

double grid_deviation(const Pgf& pgf, int grid) {
  double dev = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double t = static_cast<double>(i) / (grid - 1);
    dev = std::max(dev, std::abs(mean_map2(pgf, t) - t));
  }
  return dev;
}

}  // namespace

double mean_map(const Pgf& pgf, double t) { return 1.0 - pgf.eval(t); }

double mean_map2(const Pgf& pgf, double t) { return mean_map(pgf, mean_map(pgf, t)); }

double solve_mu1(const Pgf& pgf, double tol) {
  if (!(tol > 0.0)) throw ValidationError("tolerance must be > 0");
  // Carried to the resolution of double precision whatever tol asks for:
  // tree recursions of depth n amplify an error in mu1 by up to H'(mu1)^n.
  auto root = bisect([&](double x) { return pgf.eval(x) + x - 1.0; }, 0.0, 1.0, {0.0, 400});
  // K(0) = -1 and K(1) = H(1) >= 0 always bracket a root.
  return *root;
}

double solve_mu_star(const Pgf& pgf, double tol) {
  if (pgf.deriv_at_one() <= 1.0) return 1.0;
  auto root = bisect([&](double x) { return safe_deriv(pgf, x) - 1.0; }, 0.0, 1.0, {tol, 200});
  return root.value_or(1.0);
}

EndogenyClass classify_endogeny(const Pgf& pgf, double tol) {
  pgf.spec().require_branching();
  const double mu1 = solve_mu1(pgf);
  EndogenyClass out;
  out.h_prime_mu1 = pgf.deriv(mu1);
  out.critical = std::abs(out.h_prime_mu1 - 1.0) <= tol;
  out.endogeny = out.h_prime_mu1 <= 1.0 + tol ? Endogeny::Endogenous : Endogeny::NonEndogenous;
  return out;
}

double solve_mu2(const Pgf& pgf, double mu1, double tol) {
  pgf.spec().require_branching();
  if (pgf.deriv(mu1) <= 1.0 + kCriticalTolerance) return mu1;
  const double mu_star = solve_mu_star(pgf, tol);
  const double level = 1.0 - 2.0 * mu1;
  auto root = bisect([&](double x) { return pgf.eval(x) - x - level; }, 0.0, mu_star, {tol, 200});
  if (!root) throw FeasibilityError(2, "no root of H(x) - x = 1 - 2 mu1 left of mu*");
  return *root;
}

FixedPointReport analyze_fixed_point(const Pgf& pgf, double tol) {
  FixedPointReport r;
  const EndogenyClass cls = classify_endogeny(pgf);
  r.mu1 = solve_mu1(pgf);
  r.mu_star = solve_mu_star(pgf, tol);
  r.h_prime_mu1 = cls.h_prime_mu1;
  r.endogeny = cls.endogeny;
  r.critical = cls.critical;
  r.mu2 = solve_mu2(pgf, r.mu1, tol);
  return r;
}

MomentSequence moment_sequence(const Pgf& pgf, MomentKind kind, int K, double tol) {
  if (K < 1) throw ValidationError("moment order K must be >= 1");
  pgf.spec().require_branching();
  const double mu1 = solve_mu1(pgf);

  MomentSequence seq{kind, std::vector<double>(static_cast<std::size_t>(K) + 1, mu1)};
  seq.values[0] = 1.0;
  if (kind == MomentKind::Discrete ||
      classify_endogeny(pgf).endogeny == Endogeny::Endogenous)
    return seq;

  // Each m_n solves H(x) - (-1)^n x = sum_{k<n} C(n,k) (-1)^k m_k; the root
  // belonging to the endogenous solution sits left of mu* and below m_{n-1}.
  const double mu_star = solve_mu_star(pgf, tol);
  auto& m = seq.values;
  for (int n = 2; n <= K; ++n) {
    const double rhs = moment_rhs(m, n);
    const double sign = (n % 2) ? -1.0 : 1.0;
    const double hi = std::min(mu_star, m[n - 1]);
    auto root = bisect([&](double x) { return pgf.eval(x) - sign * x - rhs; }, 0.0, hi, {tol, 200});
    if (!root) {
      std::ostringstream os;
      os << "moment recursion has no feasible root at order " << n
         << "; only the discrete sequence exists";
      throw FeasibilityError(n, os.str());
    }
    m[n] = *root;
    const double prev = m[n - 1];
    const double lower = std::pow(prev, 1.0 + 1.0 / (n - 1));
    const double slack = 1e-9 * prev + 1e-15;
    if (m[n] > prev + slack || lower > m[n] + slack) {
      std::ostringstream os;
      os << "moment m_" << n << " = " << m[n] << " violates m_{n-1}^{1+1/(n-1)} <= m_n <= m_{n-1}";
      throw FeasibilityError(n, os.str());
    }
  }
  return seq;
}

MomentCheck check_moment_sequence(const Pgf& pgf, const std::vector<double>& m) {
  MomentCheck c;
  const int K = static_cast<int>(m.size()) - 1;
  for (int n = 1; n <= K; ++n) {
    const double sign = (n % 2) ? -1.0 : 1.0;
    c.max_residual = std::max(c.max_residual, std::abs(pgf.eval(m[n]) - sign * m[n] - moment_rhs(m, n)));
  }
  for (int n = 0; n < K; ++n) {
    const double slack = 1e-9 * m[n] + 1e-15;
    if (m[n + 1] > m[n] + slack) c.nonincreasing = false;
    if (n >= 1 && std::pow(m[n], 1.0 + 1.0 / n) > m[n + 1] + slack) c.power_bound = false;
  }
  // (-1)^k Delta^k m_j = E[X^j (1 - X)^k] >= 0 for a law on [0, 1].
  double lowest = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= K; ++j) {
    for (int k = 0; j + k <= K; ++k) {
      double d = 0.0;
      for (int i = 0; i <= k; ++i) d += binomial(k, i) * ((i % 2) ? -1.0 : 1.0) * m[j + i];
      lowest = std::min(lowest, d);
    }
  }
  c.min_scaled_difference = lowest;
  c.completely_monotone = lowest >= -1e-9;
  return c;
}

double one_sided_deriv(const Pgf& pgf, double s) {
  const double h = kEndpointStep;
  if (s <= 0.0) return (-3.0 * pgf.eval(0.0) + 4.0 * pgf.eval(h) - pgf.eval(2 * h)) / (2 * h);
  if (s >= 1.0) return (3.0 * pgf.eval(1.0) - 4.0 * pgf.eval(1.0 - h) + pgf.eval(1.0 - 2 * h)) / (2 * h);
  return safe_deriv(pgf, s);
}

TwoCycle make_two_cycle(const Pgf& pgf, double mu_plus) {
  if (!(mu_plus >= 0.0 && mu_plus <= 1.0)) throw ValidationError("cycle member outside [0, 1]");
  TwoCycle c;
  c.mu_plus = mu_plus;
  c.mu_minus = mean_map(pgf, mu_plus);
  if (std::abs(mean_map(pgf, c.mu_minus) - mu_plus) > 1e-10) {
    std::ostringstream os;
    os.precision(12);
    os << "(" << mu_plus << ", " << c.mu_minus << ") is not a two-cycle of f(t) = 1 - H(t)";
    throw ValidationError(os.str());
  }
  c.stability_product = one_sided_deriv(pgf, c.mu_plus) * one_sided_deriv(pgf, c.mu_minus);
  c.stable = c.stability_product <= 1.0 + kCriticalTolerance;
  return c;
}

CycleScan find_two_cycles(const Pgf& pgf, int grid, double tol) {
  if (grid < 100) throw ValidationError("cycle scan grid must have at least 100 points");
  CycleScan scan;
  scan.fixed_point = solve_mu1(pgf);
  scan.max_deviation = grid_deviation(pgf, grid);
  if (scan.max_deviation < kNeutralThreshold) {
    scan.neutral_continuum = true;
    return scan;
  }

  // f(f(t)) is increasing, so every root of f(f(t)) - t is isolated by a sign
  // change or sits on a grid point.
  auto F = [&](double t) { return mean_map2(pgf, t) - t; };
  std::vector<double> roots;
  double t0 = 0.0;
  double f0 = F(t0);
  for (int i = 0; i < grid; ++i) {
    const double t1 = static_cast<double>(i) / (grid - 1);
    const double f1 = i == 0 ? f0 : F(t1);
    if (std::abs(f1) <= 1e-14) {
      roots.push_back(t1);
    } else if (i > 0 && std::abs(f0) > 1e-14 && std::signbit(f0) != std::signbit(f1)) {
      if (auto r = bisect(F, t0, t1, {tol, 200})) roots.push_back(*r);
    }
    t0 = t1;
    f0 = f1;
  }

  for (double r : roots) {
    const double image = mean_map(pgf, r);
    if (std::abs(image - r) < 1e-6) continue;  // the fixed point itself
    const double hi = std::max(r, image);
    const bool seen = std::any_of(scan.cycles.begin(), scan.cycles.end(),
                                  [&](const TwoCycle& c) { return std::abs(c.mu_plus - hi) < 1e-8; });
    if (seen) continue;
    TwoCycle c;
    c.mu_plus = hi;
    c.mu_minus = std::min(r, image);
    c.stability_product = one_sided_deriv(pgf, c.mu_plus) * one_sided_deriv(pgf, c.mu_minus);
    c.stable = c.stability_product <= 1.0 + kCriticalTolerance;
    scan.cycles.push_back(c);
  }
  return scan;
}

bool iterated_stability(const TwoCycle& cycle, const Pgf& pgf) {
  const double product = one_sided_deriv(pgf, cycle.mu_plus) * one_sided_deriv(pgf, cycle.mu_minus);
  return product <= 1.0 + kCriticalTolerance;
}

IteratedMoment iterated_mu2_plus(const Pgf& pgf, const TwoCycle& cycle, double tol) {
  const double mp = cycle.mu_plus;
  if (mp <= 1e-12 || mp >= 1.0 - 1e-12) return {mp, true};
  if (iterated_stability(cycle, pgf)) return {mp, false};

  // Lesser root of phi(t) = H(1 - 2H(mu+) + H(t)) - (1 - 2 mu+ + t), restricted
  // to where the inner argument lies in [0, 1]. phi is convex there and
  // phi(mu+) = 0 with phi'(mu+) > 0 in the unstable case.
  const double shift = 1.0 - 2.0 * pgf.eval(mp);
  auto inner = [&](double t) { return shift + pgf.eval(t); };
  auto phi = [&](double t) {
    return pgf.eval(std::clamp(inner(t), 0.0, 1.0)) - (1.0 - 2.0 * mp + t);
  };
  auto dphi = [&](double t) {
    return safe_deriv(pgf, std::clamp(inner(t), 0.0, 1.0)) * safe_deriv(pgf, t) - 1.0;
  };

  double lo = 0.0;
  if (inner(0.0) < 0.0) {
    auto r = bisect(inner, 0.0, mp, {tol, 200});
    if (!r) throw FeasibilityError(2, "two-step moment equation has an empty domain");
    lo = *r;
  }
  double tmin = lo;
  if (dphi(lo) < 0.0) {
    auto r = bisect(dphi, lo, mp, {tol, 200});
    tmin = r.value_or(lo);
  }
  auto root = bisect(phi, lo, tmin, {tol, 200});
  if (!root || tmin <= lo)
    throw FeasibilityError(2, "no second root of the two-step moment equation below mu+");
  return {*root, false};
}

PerronResult perron_rho(const Pgf& pgf, int n) {
  const Pgf truncated = pgf.truncated(n);
  PerronResult r;
  r.mu1_n = solve_mu1(truncated);
  r.n_star = truncated.ess_sup();
  r.rho = truncated.deriv(r.mu1_n) / static_cast<double>(r.n_star);
  r.d_rho = static_cast<double>(r.n_star) * r.rho;
  return r;
}

BasinOfMean basin_of_mean(const Pgf& pgf, double m0, int max_iter, double tol) {
  if (!(m0 >= 0.0 && m0 <= 1.0)) throw ValidationError("initial mean must lie in [0, 1]");
  const double mu1 = solve_mu1(pgf);
  BasinOfMean out;
  if (std::abs(m0 - mu1) <= tol) {
    out.kind = BasinKind::ToMu1;
    return out;
  }
  if (grid_deviation(pgf, 1001) < kNeutralThreshold) {
    out.kind = BasinKind::Neutral;
    return out;
  }
  // Away from mu1 an unstable fixed point is never approached, so only the
  // stable case may conclude ToMu1 from the iterates.
  const bool attracting = safe_deriv(pgf, mu1) <= 1.0 + kCriticalTolerance;
  // Converged even/odd subsequences only count as a cycle when they match a
  // genuine root pair of f(f(t)) = t; slow oscillation around a critical
  // fixed point looks locally the same.
  const CycleScan scan = find_two_cycles(pgf, 1001);
  double before = m0;  // t_{k-1}
  double t = mean_map(pgf, m0);
  for (int k = 1; k <= max_iter; ++k) {
    out.iterations = k;
    if (attracting && std::abs(t - mu1) <= tol) {
      out.kind = BasinKind::ToMu1;
      return out;
    }
    const double next = mean_map(pgf, t);
    if (std::abs(next - before) <= tol && std::abs(next - t) > tol) {
      const double hi = std::max(next, t);
      for (const TwoCycle& c : scan.cycles) {
        if (std::abs(c.mu_plus - hi) <= 1e-6) {
          out.kind = BasinKind::ToCycle;
          out.mu_plus = c.mu_plus;
          out.mu_minus = c.mu_minus;
          return out;
        }
      }
    }
    before = t;
    t = next;
  }
  out.kind = BasinKind::Inconclusive;
  return out;
}

const char* to_string(Endogeny e) {
  return e == Endogeny::Endogenous ? "Endogenous" : "NonEndogenous";
}

const char* to_string(MomentKind k) { return k == MomentKind::Discrete ? "Discrete" : "Endogenous"; }

const char* to_string(BasinKind k) {
  switch (k) {
    case BasinKind::ToMu1: return "ToMu1";
    case BasinKind::ToCycle: return "ToCycle";
    case BasinKind::Neutral: return "Neutral";
    case BasinKind::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

}  // namespace rdelab
