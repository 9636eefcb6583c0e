#pragma once

// Deterministic analysis of X = 1 - prod_{i<=N} X_i: the invariant mean,
// endogeny, moment sequences, and the one- and two-cycles of the mean map
// f(t) = 1 - H(t).

#include <cstdint>
#include <vector>

#include "rdelab/pgf.hpp"

namespace rdelab {

/// Tolerance on |H'(mu1) - 1| below which a law is treated as critical.
inline constexpr double kCriticalTolerance = 1e-9;

enum class Endogeny { Endogenous, NonEndogenous };

struct EndogenyClass {
  Endogeny endogeny = Endogeny::Endogenous;
  bool critical = false;
  double h_prime_mu1 = 0.0;
};

struct FixedPointReport {
  double mu1 = 0.0;
  double mu_star = 0.0;
  double h_prime_mu1 = 0.0;
  double mu2 = 0.0;
  Endogeny endogeny = Endogeny::Endogenous;
  bool critical = false;
};

enum class MomentKind { Discrete, Endogenous };

struct MomentSequence {
  MomentKind kind = MomentKind::Discrete;
  std::vector<double> values;  ///< m_0 .. m_K
};

/// Diagnostics for a candidate moment sequence.
struct MomentCheck {
  double max_residual = 0.0;        ///< max_n |H(m_n) - sum_k C(n,k) (-1)^k m_k|
  bool nonincreasing = true;        ///< m_{n+1} <= m_n
  bool power_bound = true;          ///< m_n^{1 + 1/n} <= m_{n+1}
  double min_scaled_difference = 0; ///< min over j,k of (-1)^k Delta^k m_j
  bool completely_monotone = true;  ///< min_scaled_difference >= -1e-9
};

/// A pair with f(mu_plus) = mu_minus and f(mu_minus) = mu_plus.
struct TwoCycle {
  double mu_plus = 0.0;
  double mu_minus = 0.0;
  double stability_product = 0.0;  ///< H'(mu_plus) H'(mu_minus)
  bool stable = true;
};

struct CycleScan {
  double fixed_point = 0.0;       ///< mu1, the unique fixed point of f
  bool neutral_continuum = false; ///< f(f(t)) = t on the whole grid
  double max_deviation = 0.0;     ///< sup over the grid of |f(f(t)) - t|
  std::vector<TwoCycle> cycles;   ///< proper two-cycles, mu_plus > mu_minus
};

struct IteratedMoment {
  double mu2_plus = 0.0;
  bool degenerate = false;  ///< mu_plus in {0, 1}; the solution is constant
};

struct PerronResult {
  double rho = 0.0;
  std::int64_t n_star = 0;
  double d_rho = 0.0;
  double mu1_n = 0.0;  ///< invariant mean of the truncated law
};

enum class BasinKind { ToMu1, ToCycle, Neutral, Inconclusive };

struct BasinOfMean {
  BasinKind kind = BasinKind::Inconclusive;
  double mu_plus = 0.0;  ///< cycle limits when kind == ToCycle
  double mu_minus = 0.0;
  int iterations = 0;
};

/// f(t) = 1 - H(t).
double mean_map(const Pgf& pgf, double t);
/// f(f(t)).
double mean_map2(const Pgf& pgf, double t);

/// Unique root of H(x) + x = 1 in (0, 1). Bisection runs to the resolution
/// of double precision, so |H(x) + x - 1| < tol for any tol above rounding.
double solve_mu1(const Pgf& pgf, double tol = 1e-12);

/// Argmin of H(x) - x on [0, 1].
double solve_mu_star(const Pgf& pgf, double tol = 1e-12);

/// Endogenous iff H'(mu1) <= 1 + tol; critical when |H'(mu1) - 1| <= tol.
EndogenyClass classify_endogeny(const Pgf& pgf, double tol = kCriticalTolerance);

/// Second moment of the endogenous solution: the lesser root of
/// H(x) - x = 1 - 2 mu1, or mu1 itself in the endogenous case.
double solve_mu2(const Pgf& pgf, double mu1, double tol = 1e-12);

FixedPointReport analyze_fixed_point(const Pgf& pgf, double tol = 1e-12);

/// Moments m_0..m_K of the discrete or the endogenous solution. Throws
/// FeasibilityError when the endogenous recursion has no admissible root.
MomentSequence moment_sequence(const Pgf& pgf, MomentKind kind, int K, double tol = 1e-12);

MomentCheck check_moment_sequence(const Pgf& pgf, const std::vector<double>& m);

/// Derivative with one-sided second-order stencils (step 1e-6) at 0 and 1.
double one_sided_deriv(const Pgf& pgf, double s);

/// Builds the cycle through `mu_plus`; throws ValidationError unless
/// f(f(mu_plus)) = mu_plus within 1e-10.
TwoCycle make_two_cycle(const Pgf& pgf, double mu_plus);

CycleScan find_two_cycles(const Pgf& pgf, int grid = 1001, double tol = 1e-12);

/// Stable iff H'(mu_plus) H'(mu_minus) <= 1.
bool iterated_stability(const TwoCycle& cycle, const Pgf& pgf);

/// Second moment of the endogenous solution of the two-step equation with
/// mean mu_plus.
IteratedMoment iterated_mu2_plus(const Pgf& pgf, const TwoCycle& cycle, double tol = 1e-12);

/// Perron root of the off-diagonal pair chain of the law truncated at n.
PerronResult perron_rho(const Pgf& pgf, int n);

BasinOfMean basin_of_mean(const Pgf& pgf, double m0, int max_iter = 10000, double tol = 1e-9);

const char* to_string(Endogeny e);
const char* to_string(MomentKind k);
const char* to_string(BasinKind k);

}  // namespace rdelab
