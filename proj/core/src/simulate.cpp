#include "rdelab/simulate.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rdelab/errors.hpp"
#include "rdelab/parallel.hpp"

namespace rdelab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_depth(int depth) {
  if (depth < 0) throw ValidationError("depth must be >= 0, got " + std::to_string(depth));
}

// Mean of xs computed around xs[0], so a constant sample has exactly that
// constant as its mean and zero spread.
struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
Moments sample_moments(std::span<const ReplicateRecord> recs, F value) {
  const std::size_t n = recs.size();
  if (n == 0) return {kNaN, kNaN};
  const double x0 = value(recs[0]);
  double s1 = 0.0;
  for (const auto& r : recs) s1 += value(r) - x0;
  const double mean = x0 + s1 / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const auto& r : recs) {
    const double d = value(r) - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

// Bottom-up pass shared by C and S. Nodes are in breadth-first order so
// children always follow their parent.
template <class Boundary>
void bottom_up(const SampledTree& tree, int bd, std::vector<double>& vals, Boundary boundary) {
  const auto nodes = tree.nodes();
  vals.assign(nodes.size(), kNaN);
  for (std::size_t k = nodes.size(); k-- > 0;) {
    const auto& nd = nodes[k];
    if (nd.depth > bd) continue;
    if (nd.depth == bd) {
      vals[k] = boundary(k);
    } else if (nd.family.is_infinite()) {
      vals[k] = 1.0;
    } else {
      double prod = 1.0;
      const auto end = nd.first_child + nd.family.count;
      for (auto c = nd.first_child; c < end; ++c) prod *= vals[static_cast<std::size_t>(c)];
      vals[k] = 1.0 - prod;
    }
  }
}

}  // namespace

// ---- SampledTree ----

std::size_t SampledTree::boundary_count() const {
  std::size_t n = 0;
  for (const auto& nd : nodes_) n += nd.depth == depth_;
  return n;
}

std::vector<int> SampledTree::address(std::size_t i) const {
  std::vector<int> out;
  for (auto k = static_cast<std::int64_t>(i); nodes_[k].parent >= 0; k = nodes_[k].parent)
    out.push_back(nodes_[k].slot);
  return {out.rbegin(), out.rend()};
}

std::optional<std::size_t> SampledTree::find(std::span<const int> address) const {
  if (nodes_.empty()) return std::nullopt;
  std::size_t k = 0;
  for (int slot : address) {
    const auto& nd = nodes_[k];
    if (nd.depth >= depth_ || nd.family.is_infinite()) return std::nullopt;
    if (slot < 1 || slot > nd.family.count) return std::nullopt;
    k = static_cast<std::size_t>(nd.first_child + slot - 1);
  }
  return k;
}

void SampledTree::validate() const {
  if (nodes_.empty()) throw ValidationError("tree has no root");
  if (nodes_[0].parent != -1 || nodes_[0].depth != 0) throw ValidationError("malformed root");
  std::int64_t expected_next = 1;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& nd = nodes_[k];
    if (nd.depth > depth_) throw ValidationError("node below the boundary");
    if (nd.depth == depth_ || nd.family.is_infinite()) {
      if (nd.first_child != -1) throw ValidationError("leaf with materialized children");
      continue;
    }
    if (nd.family.count < 1) throw ValidationError("family size must be >= 1");
    if (nd.first_child != expected_next) throw ValidationError("children not in breadth-first order");
    for (std::int64_t j = 0; j < nd.family.count; ++j) {
      const auto c = static_cast<std::size_t>(nd.first_child + j);
      if (c >= nodes_.size()) throw ValidationError("missing child");
      const auto& ch = nodes_[c];
      if (ch.parent != static_cast<std::int32_t>(k) || ch.depth != nd.depth + 1 || ch.slot != j + 1)
        throw ValidationError("inconsistent child record");
    }
    expected_next += nd.family.count;
  }
  if (expected_next != static_cast<std::int64_t>(nodes_.size()))
    throw ValidationError("unreachable nodes in tree");
}

SampledTree SampledTree::from_family_sizes(int depth, std::span<const FamilySize> sizes) {
  check_depth(depth);
  SampledTree t;
  t.depth_ = depth;
  t.nodes_.push_back(SampledTree::Node{});
  std::size_t next_size = 0;
  for (std::size_t k = 0; k < t.nodes_.size(); ++k) {
    if (t.nodes_[k].depth == depth) continue;
    if (next_size >= sizes.size()) throw ValidationError("too few family sizes for tree");
    const FamilySize f = sizes[next_size++];
    if (!f.is_infinite() && f.count < 1) throw ValidationError("family size must be >= 1");
    t.nodes_[k].family = f;
    if (f.is_infinite()) continue;
    t.nodes_[k].first_child = static_cast<std::int64_t>(t.nodes_.size());
    for (std::int64_t j = 0; j < f.count; ++j) {
      SampledTree::Node c;
      c.parent = static_cast<std::int32_t>(k);
      c.depth = t.nodes_[k].depth + 1;
      c.slot = static_cast<std::int32_t>(j + 1);
      t.nodes_.push_back(c);
    }
  }
  if (next_size != sizes.size()) throw ValidationError("too many family sizes for tree");
  return t;
}

void sample_tree_into(SampledTree& tree, const FamilySampler& sampler, int depth, RngStream& rng,
                      std::size_t node_cap) {
  check_depth(depth);
  auto& nodes = tree.nodes_;
  tree.depth_ = depth;
  nodes.clear();
  nodes.push_back(SampledTree::Node{});
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].depth == depth) continue;
    const FamilySize f = sampler(rng);
    nodes[k].family = f;
    if (f.is_infinite()) continue;
    if (static_cast<std::uint64_t>(f.count) > node_cap - nodes.size())
      throw ResourceError("tree exceeds node cap of " + std::to_string(node_cap) +
                          " nodes; reduce depth");
    nodes[k].first_child = static_cast<std::int64_t>(nodes.size());
    const std::int32_t d = nodes[k].depth + 1;
    for (std::int64_t j = 0; j < f.count; ++j) {
      SampledTree::Node c;
      c.parent = static_cast<std::int32_t>(k);
      c.depth = d;
      c.slot = static_cast<std::int32_t>(j + 1);
      nodes.push_back(c);
    }
  }
}

SampledTree sample_tree(const OffspringSpec& spec, int depth, RngStream& rng, std::int64_t budget,
                        std::size_t node_cap) {
  spec.validate();
  SampledTree t;
  sample_tree_into(t, FamilySampler(spec, budget), depth, rng, node_cap);
  return t;
}

// ---- solutions ----

SolutionLayer conditional_solution(const SampledTree& tree, double boundary_value,
                                   std::optional<int> boundary_depth) {
  const int bd = boundary_depth.value_or(tree.depth());
  if (bd < 0 || bd > tree.depth())
    throw ValidationError("boundary depth must lie in [0, tree depth]");
  if (!(boundary_value >= 0.0 && boundary_value <= 1.0))
    throw ValidationError("boundary value must lie in [0, 1]");
  SolutionLayer out{SolutionKind::ConditionalC, bd, {}};
  bottom_up(tree, bd, out.values, [&](std::size_t) { return boundary_value; });
  return out;
}

SolutionLayer discrete_solution(const SampledTree& tree, double mu1, RngStream& rng) {
  if (!(mu1 >= 0.0 && mu1 <= 1.0)) throw ValidationError("mu1 must lie in [0, 1]");
  SolutionLayer out{SolutionKind::DiscreteS, tree.depth(), {}};
  // Boundary draws happen in breadth-first order even though the pass runs
  // backwards, so the explicit-boundary overload sees the same assignment.
  std::vector<std::uint8_t> bits;
  bits.reserve(tree.boundary_count());
  for (std::size_t k = 0; k < tree.size(); ++k)
    if (tree.is_boundary(k)) bits.push_back(rng.bernoulli(mu1) ? 1 : 0);
  return discrete_solution(tree, bits);
}

SolutionLayer discrete_solution(const SampledTree& tree, std::span<const std::uint8_t> boundary) {
  if (boundary.size() != tree.boundary_count())
    throw ValidationError("boundary assignment has " + std::to_string(boundary.size()) +
                          " entries, tree has " + std::to_string(tree.boundary_count()));
  SolutionLayer out{SolutionKind::DiscreteS, tree.depth(), {}};
  std::size_t next = boundary.size();
  bottom_up(tree, tree.depth(), out.values,
            [&](std::size_t) { return boundary[--next] ? 1.0 : 0.0; });
  return out;
}

std::vector<double> conditional_roots_by_depth(const SampledTree& tree, double boundary_value) {
  std::vector<double> roots;
  roots.reserve(static_cast<std::size_t>(tree.depth()) + 1);
  std::vector<double> vals;
  for (int n = 0; n <= tree.depth(); ++n) {
    bottom_up(tree, n, vals, [&](std::size_t) { return boundary_value; });
    roots.push_back(vals.front());
  }
  return roots;
}

// ---- Monte Carlo ----

std::vector<ReplicateRecord> run_replicates(const OffspringSpec& spec, int depth, std::int64_t reps,
                                            std::uint64_t seed, double boundary_value,
                                            bool with_discrete, const SimOptions& opt) {
  check_depth(depth);
  if (reps < 1) throw ValidationError("reps must be >= 1");
  spec.validate();
  const FamilySampler sampler(spec, opt.budget);
  std::vector<ReplicateRecord> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
    SampledTree tree;
    std::vector<double> vc;
    std::vector<std::uint8_t> vs, vs2;
    for (std::size_t r = begin; r < end; ++r) {
      RngStream rng(seed, r);
      sample_tree_into(tree, sampler, depth, rng, opt.node_cap);
      if (!with_discrete) {
        bottom_up(tree, depth, vc, [&](std::size_t) { return boundary_value; });
        out[r] = {vc.front(), kNaN, kNaN};
        continue;
      }
      // C, S and S' in one backward sweep. Boundary bits are drawn in
      // reverse breadth-first order, S before S' at each node.
      const auto nodes = tree.nodes();
      vc.resize(nodes.size());
      vs.resize(nodes.size());
      vs2.resize(nodes.size());
      for (std::size_t k = nodes.size(); k-- > 0;) {
        const auto& nd = nodes[k];
        if (nd.depth == depth) {
          vc[k] = boundary_value;
          vs[k] = rng.bernoulli(boundary_value);
          vs2[k] = rng.bernoulli(boundary_value);
        } else if (nd.family.is_infinite()) {
          vc[k] = 1.0;
          vs[k] = vs2[k] = 1;
        } else {
          double prod = 1.0;
          std::uint8_t all1 = 1, all2 = 1;
          const auto c0 = static_cast<std::size_t>(nd.first_child);
          const auto c1 = c0 + static_cast<std::size_t>(nd.family.count);
          for (auto c = c0; c < c1; ++c) {
            prod *= vc[c];
            all1 &= vs[c];
            all2 &= vs2[c];
          }
          vc[k] = 1.0 - prod;
          vs[k] = 1 - all1;
          vs2[k] = 1 - all2;
        }
      }
      out[r] = {vc.front(), static_cast<double>(vs.front()), static_cast<double>(vs2.front())};
    }
  });
  return out;
}

McMoments summarize_moments(std::span<const ReplicateRecord> records, int depth) {
  const auto m1 = sample_moments(records, [](const ReplicateRecord& r) { return r.root_c; });
  const auto m2 =
      sample_moments(records, [](const ReplicateRecord& r) { return r.root_c * r.root_c; });
  return {m1.mean, m2.mean, m1.se, m2.se, static_cast<std::int64_t>(records.size()), depth};
}

EndogenyDiagnostic summarize_diagnostic(std::span<const ReplicateRecord> records, int depth) {
  const auto e = sample_moments(
      records, [](const ReplicateRecord& r) { return r.root_c * (1.0 - r.root_c); });
  const auto p = sample_moments(
      records, [](const ReplicateRecord& r) { return r.root_s != r.root_s2 ? 1.0 : 0.0; });
  return {e.mean, e.se, p.mean, p.se, static_cast<std::int64_t>(records.size()), depth};
}

namespace {

void check_reps(std::int64_t reps) {
  if (reps < 100) throw ValidationError("reps must be >= 100, got " + std::to_string(reps));
}

}  // namespace

McMoments mc_moments(const OffspringSpec& spec, int depth, std::int64_t reps, std::uint64_t seed,
                     const SimOptions& opt) {
  check_reps(reps);
  const double mu1 = solve_mu1(Pgf(spec));
  const auto recs = run_replicates(spec, depth, reps, seed, mu1, false, opt);
  return summarize_moments(recs, depth);
}

EndogenyDiagnostic endogeny_diagnostic(const OffspringSpec& spec, int depth, std::int64_t reps,
                                       std::uint64_t seed, const SimOptions& opt) {
  check_reps(reps);
  const double mu1 = solve_mu1(Pgf(spec));
  const auto recs = run_replicates(spec, depth, reps, seed, mu1, true, opt);
  return summarize_diagnostic(recs, depth);
}

McMoments iterated_conditional(const OffspringSpec& spec, const TwoCycle& cycle, int half_depth,
                               std::int64_t reps, std::uint64_t seed, const SimOptions& opt) {
  check_reps(reps);
  check_depth(half_depth);
  const auto recs = run_replicates(spec, 2 * half_depth, reps, seed, cycle.mu_plus, false, opt);
  return summarize_moments(recs, 2 * half_depth);
}

}  // namespace rdelab
