#pragma once

// Offspring laws on {1, 2, ..., infinity} and their generating functions.

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "rdelab/rng.hpp"

namespace rdelab {

/// Family size of a node: a positive count or infinity.
struct FamilySize {
  static constexpr std::int64_t kInfinite = -1;

  std::int64_t count = 1;

  static constexpr FamilySize infinite() noexcept { return FamilySize{kInfinite}; }
  constexpr bool is_infinite() const noexcept { return count == kInfinite; }

  friend constexpr bool operator==(FamilySize, FamilySize) = default;
};

/// Parametric description of the law of N, the number of children.
///
/// Invariants checked by validate(): no mass at zero, total mass one
/// (including the mass at infinity) within 1e-12. Analysis routines that
/// rely on strict convexity additionally call require_branching().
class OffspringSpec {
 public:
  struct Deterministic {
    int d = 2;
  };
  struct Geometric {
    double alpha = 0.5;  ///< P(N = k) = alpha (1 - alpha)^(k - 1)
  };
  struct FinitePmf {
    std::vector<double> weights;  ///< weights[k - 1] = P(N = k)
    double infinity_mass = 0.0;
  };
  struct Thinned {
    std::shared_ptr<const OffspringSpec> base;
    double p = 0.5;  ///< probability a child continues the line of descent
  };
  using Variant = std::variant<Deterministic, Geometric, FinitePmf, Thinned>;

  static OffspringSpec deterministic(int d);
  static OffspringSpec geometric(double alpha);
  static OffspringSpec finite(std::vector<double> weights, double infinity_mass = 0.0);
  static OffspringSpec thinned(OffspringSpec base, double p);

  const Variant& variant() const noexcept { return v_; }

  template <class T>
  bool is() const noexcept {
    return std::holds_alternative<T>(v_);
  }

  /// Throws ValidationError naming the violated assumption.
  void validate() const;

  /// P(2 <= N < infinity) > 0; the law must be genuinely branching.
  bool is_branching() const;

  /// validate() plus is_branching(), throwing ValidationError.
  void require_branching() const;

  /// Short human readable form, e.g. "thinned(p=0.5, deterministic(2))".
  std::string describe() const;

 private:
  explicit OffspringSpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

/// Generating function H(s) = E[s^N] of an offspring law, with H(1) <= 1 and
/// defect 1 - H(1) = P(N = infinity). Immutable; safe to share across threads.
class Pgf {
 public:
  /// Validates the spec. `tolerance` is the increment at which the
  /// fixed-point evaluation of thinned laws stops.
  explicit Pgf(OffspringSpec spec, double tolerance = 1e-14);

  const OffspringSpec& spec() const noexcept { return spec_; }

  /// H(s) for s in [0, 1].
  double eval(double s) const;
  double operator()(double s) const { return eval(s); }

  /// H'(s). Defined on [0, 1) for every law and at s = 1 as the left
  /// derivative for non-thinned laws. Throws DomainError at a singularity.
  double deriv(double s) const;

  /// lim_{s -> 1-} H'(s); +infinity when the derivative diverges.
  double deriv_at_one() const;

  /// 1 - H(1).
  double defect() const;

  /// P(N = k) for k = 0..n.
  std::vector<double> coefficients(int n) const;

  /// Generating function of min(n, N).
  Pgf truncated(int n) const;

  /// Largest finite value N can take, or -1 when N is unbounded.
  std::int64_t ess_sup() const;

  /// Residual |H(s) - G(p H(s) + q s)| of the defining relation of a thinned
  /// law; zero for every other law.
  double thinning_residual(double s) const;

 private:
  double thinned_eval(double s) const;
  double thinned_deriv(double s) const;

  OffspringSpec spec_;
  double tolerance_;
  std::shared_ptr<const Pgf> base_;  // thinned laws only
};

/// Truncation of a law at n: the law of min(n, N).
Pgf truncate_pgf(const Pgf& pgf, int n);

inline constexpr std::int64_t kDefaultExplorationBudget = 1'000'000;

/// Draws family sizes. Holds precomputed tables; cheap to copy.
///
/// Parametric laws use exact inverse-CDF sampling. Thinned laws simulate the
/// pruning of the base tree, counting children that stop the line of descent;
/// the draw is reported infinite once more than `budget` nodes have been
/// explored.
class FamilySampler {
 public:
  explicit FamilySampler(const OffspringSpec& spec,
                         std::int64_t budget = kDefaultExplorationBudget);

  FamilySize operator()(RngStream& rng) const;

 private:
  OffspringSpec::Variant kind_;
  std::vector<double> cdf_;  // finite laws
  double log_beta_ = 0.0;    // geometric laws
  std::shared_ptr<const FamilySampler> base_;
  std::int64_t budget_;
};

FamilySize sample_family_size(const OffspringSpec& spec, RngStream& rng,
                              std::int64_t budget = kDefaultExplorationBudget);

}  // namespace rdelab
