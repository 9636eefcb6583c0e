#pragma once

// The distributional map T(nu) = law of 1 - prod_{i<=N} X_i, X_i iid nu,
// acting on equally weighted samples, plus the exact moment recursions that
// track it and the basin-of-attraction classification.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rdelab/analysis.hpp"
#include "rdelab/pgf.hpp"
#include "rdelab/rng.hpp"

namespace rdelab {

inline constexpr std::size_t kDefaultSampleSize = 100'000;

/// An equally weighted sample of points in [0, 1].
class EmpiricalDist {
 public:
  EmpiricalDist() = default;
  /// Throws ValidationError if empty or if a point lies outside [0, 1].
  explicit EmpiricalDist(std::vector<double> points);

  static EmpiricalDist point_mass(double x, std::size_t size);

  /// Reads one point per line; blank lines and a non-numeric first line
  /// (header) are skipped. Throws ValidationError on malformed input.
  static EmpiricalDist read_csv(std::istream& in);
  static EmpiricalDist load_csv(const std::string& path);

  const std::vector<double>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }

  double mean() const;
  double second_moment() const;
  /// Standard errors of mean() and second_moment() as estimates of the
  /// moments of the law the points were drawn from.
  double se_mean() const;
  double se_second_moment() const;

 private:
  friend bool anchor_mean(EmpiricalDist&, double);
  std::vector<double> points_;
};

/// iid Uniform(0,1) points transformed so that the sample mean equals `mean`.
EmpiricalDist mean_matched_uniform(double mean, std::size_t size, RngStream& rng);

/// iid Bernoulli(p) points.
EmpiricalDist bernoulli_sample(double p, std::size_t size, RngStream& rng);

/// True when at most a 1e-3 fraction of the points satisfies
/// min(x, 1 - x) > 1e-9, i.e. the sample looks like a law on {0, 1}.
bool is_discrete_concentrated(const EmpiricalDist& nu);

/// Applies x -> x^g to every point, with g > 0 chosen so that the sample mean
/// equals `target` to rounding. The map fixes 0 and 1, so samples on {0, 1}
/// are left unchanged. Returns false (points unchanged) when the target lies
/// outside the range the map can reach.
bool anchor_mean(EmpiricalDist& nu, double target);

/// One application of T: each output point is 1 - prod of N points resampled
/// with replacement from nu, with N drawn from the spec (N infinite gives 1).
/// Output is computed in fixed chunks on streams derived from one draw of
/// `rng`, so it does not depend on the thread count.
EmpiricalDist apply_T(const EmpiricalDist& nu, const OffspringSpec& spec, RngStream& rng,
                      std::size_t out_size, std::int64_t budget = kDefaultExplorationBudget);

/// Kolmogorov distance between two samples, evaluated at the `quantiles`
/// evenly spaced quantiles of each sample.
double kolmogorov_distance(const EmpiricalDist& a, const EmpiricalDist& b, int quantiles = 1000);

/// Kolmogorov distance from a sample to the law Bernoulli(mu1) on {0, 1}.
double kolmogorov_to_discrete(const EmpiricalDist& a, double mu1);

struct TrajectoryRecord {
  int k = 0;
  double m1 = 0.0;
  double m2 = 0.0;
  std::optional<double> r;
  std::optional<double> e;
  std::optional<double> kolmogorov;
  double se_m1 = 0.0;  ///< zero for analytic trajectories
  double se_m2 = 0.0;
};

/// Target of the Kolmogorov column: a sample, or the discrete law with the
/// given mean.
struct DiscreteTarget {
  double mu1 = 0.0;
};
using IterateTarget = std::variant<std::monostate, EmpiricalDist, DiscreteTarget>;

struct IterateOptions {
  std::size_t out_size = 0;  ///< 0 keeps the size of nu0
  IterateTarget target;
  /// After each step, pull the sample mean onto 1 - H(previous mean) with
  /// anchor_mean. Removes the resampling drift of the mean, which an
  /// unstable fixed point of the mean map amplifies geometrically.
  bool anchor_mean = false;
  std::int64_t budget = kDefaultExplorationBudget;
};

/// Records steps 0..steps (step 0 describes nu0). When `final_dist` is given
/// it receives the last iterate.
std::vector<TrajectoryRecord> iterate_T(const EmpiricalDist& nu0, const OffspringSpec& spec,
                                        int steps, RngStream& rng, const IterateOptions& opt = {},
                                        EmpiricalDist* final_dist = nullptr);

/// Exact recursions for the first and second moments of T^k(nu) and for the
/// cross moment r_k = E[X C] with the endogenous solution C. Records steps
/// 0..steps with e = m2 - 2 r + mu2, the mean square distance to C.
std::vector<TrajectoryRecord> moment_recursions(const Pgf& pgf, double m1_0, double m2_0,
                                                double r_0, double mu1, int steps);

enum class BasinVerdict { InBasin, NotInBasin, Boundary };

struct BasinTestResult {
  BasinVerdict analytic = BasinVerdict::NotInBasin;
  BasinVerdict empirical = BasinVerdict::NotInBasin;
  double mean0 = 0.0;
  bool discrete_concentrated = false;
  bool stable = true;  ///< H'(mu1) <= 1
  double mu1 = 0.0;
  double mu2 = 0.0;
  BasinKind mean_basin = BasinKind::Inconclusive;  ///< stable case only
  std::vector<TrajectoryRecord> trajectory;
};

/// Basin of the endogenous law for nu0. The analytic verdict decides from the
/// mean (and, in the unstable case, the {0,1} test); the empirical verdict
/// checks that the last iterate has moments within 4 SE + tol of (mu1, mu2).
BasinTestResult basin_test(const EmpiricalDist& nu0, const OffspringSpec& spec, int steps,
                           double tol, RngStream& rng, const IterateOptions& opt = {});

const char* to_string(BasinVerdict v);

}  // namespace rdelab
