#pragma once

// Depth-bounded Galton-Watson trees and the tree-indexed solutions S (values
// in {0, 1}) and C = P(S = 1 | tree) computed on them.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rdelab/analysis.hpp"
#include "rdelab/pgf.hpp"
#include "rdelab/rng.hpp"

namespace rdelab {

inline constexpr std::size_t kDefaultNodeCap = 10'000'000;
inline constexpr int kDefaultBoundaryDepth = 12;

/// A tree sampled to a fixed depth, stored in breadth-first order.
///
/// Nodes above the boundary carry their family size; the children of a node
/// occupy a contiguous index range starting at first_child. Nodes with an
/// infinite family are leaves. Nodes at depth() form the boundary and carry no
/// family size (count 0).
class SampledTree {
 public:
  struct Node {
    std::int32_t parent = -1;
    std::int32_t depth = 0;
    std::int32_t slot = 0;  ///< 1-based position among its siblings
    std::int64_t first_child = -1;
    FamilySize family{0};
  };

  SampledTree() = default;

  /// Builds a tree from the family sizes of its non-boundary nodes in
  /// breadth-first order. Throws ValidationError if the sizes do not describe
  /// a tree of the given depth.
  static SampledTree from_family_sizes(int depth, std::span<const FamilySize> sizes);

  int depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  bool is_boundary(std::size_t i) const { return nodes_[i].depth == depth_; }
  std::size_t boundary_count() const;

  /// Address of node i: the slot sequence from the root (empty for the root).
  std::vector<int> address(std::size_t i) const;
  std::optional<std::size_t> find(std::span<const int> address) const;

  /// Checks the structural invariants; throws ValidationError.
  void validate() const;

 private:
  friend void sample_tree_into(SampledTree&, const FamilySampler&, int, RngStream&, std::size_t);

  int depth_ = 0;
  std::vector<Node> nodes_;
};

/// Breadth-first sampling of family sizes down to `depth`. Throws
/// ResourceError once more than `node_cap` nodes would be materialized.
SampledTree sample_tree(const OffspringSpec& spec, int depth, RngStream& rng,
                        std::int64_t budget = kDefaultExplorationBudget,
                        std::size_t node_cap = kDefaultNodeCap);

/// Reusing variant of sample_tree for hot loops.
void sample_tree_into(SampledTree& tree, const FamilySampler& sampler, int depth, RngStream& rng,
                      std::size_t node_cap = kDefaultNodeCap);

enum class SolutionKind { DiscreteS, ConditionalC };

/// Per-node values aligned with SampledTree node indices. Nodes deeper than
/// the boundary used for the pass hold NaN.
struct SolutionLayer {
  SolutionKind kind = SolutionKind::ConditionalC;
  int boundary_depth = 0;
  std::vector<double> values;

  double root() const { return values.front(); }
};

/// Bottom-up pass with every node at `boundary_depth` set to `boundary_value`
/// (mu1 for C^n), interior nodes 1 - prod children, infinite families 1.
/// boundary_depth defaults to the tree depth.
SolutionLayer conditional_solution(const SampledTree& tree, double boundary_value,
                                   std::optional<int> boundary_depth = std::nullopt);

/// Same recursion with iid Bernoulli(mu1) boundary values.
SolutionLayer discrete_solution(const SampledTree& tree, double mu1, RngStream& rng);

/// Discrete recursion with the given boundary values, listed in
/// breadth-first order of the boundary nodes.
SolutionLayer discrete_solution(const SampledTree& tree, std::span<const std::uint8_t> boundary);

/// Root value of C^n for n = 0..tree.depth() on one tree.
std::vector<double> conditional_roots_by_depth(const SampledTree& tree, double boundary_value);

struct SimOptions {
  std::int64_t budget = kDefaultExplorationBudget;
  std::size_t node_cap = kDefaultNodeCap;
};

/// Per-replicate root values. root_s and root_s2 are two independent
/// boundary resamplings on the same tree; NaN unless requested.
struct ReplicateRecord {
  double root_c = 0.0;
  double root_s = 0.0;
  double root_s2 = 0.0;
};

/// Replicate r draws from RngStream(seed, r): first the tree, then (if
/// `with_discrete`) the two boundary samples. Runs in parallel; the result
/// is independent of the thread count.
std::vector<ReplicateRecord> run_replicates(const OffspringSpec& spec, int depth, std::int64_t reps,
                                            std::uint64_t seed, double boundary_value,
                                            bool with_discrete, const SimOptions& opt = {});

struct McMoments {
  double mean_c = 0.0;
  double m2_c = 0.0;
  double se_mean = 0.0;
  double se_m2 = 0.0;
  std::int64_t reps = 0;
  int depth = 0;
};

struct EndogenyDiagnostic {
  double e_c_one_minus_c = 0.0;  ///< estimate of E[C (1 - C)]
  double se_e = 0.0;
  double p_disagree = 0.0;       ///< estimate of P(S != S')
  double se_p = 0.0;
  std::int64_t reps = 0;
  int depth = 0;
};

McMoments summarize_moments(std::span<const ReplicateRecord> records, int depth);
EndogenyDiagnostic summarize_diagnostic(std::span<const ReplicateRecord> records, int depth);

/// Monte Carlo moments of the root of C^depth.
McMoments mc_moments(const OffspringSpec& spec, int depth, std::int64_t reps, std::uint64_t seed,
                     const SimOptions& opt = {});

/// E[C(1 - C)] and P(S != S') from two boundary resamplings per tree.
EndogenyDiagnostic endogeny_diagnostic(const OffspringSpec& spec, int depth, std::int64_t reps,
                                       std::uint64_t seed, const SimOptions& opt = {});

/// Moments of the root when the boundary constant mu_plus is placed at depth
/// 2 * half_depth, for a two-cycle (mu_plus, mu_minus) of the mean map.
McMoments iterated_conditional(const OffspringSpec& spec, const TwoCycle& cycle, int half_depth,
                               std::int64_t reps, std::uint64_t seed, const SimOptions& opt = {});

}  // namespace rdelab
