#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "rdelab/errors.hpp"
#include "rdelab/simulate.hpp"

using namespace rdelab;

namespace {

const auto kBinary = OffspringSpec::deterministic(2);
const auto kHalfInfinite = OffspringSpec::finite({0.0, 0.5}, 0.5);
const auto kGeo = OffspringSpec::geometric(0.25);

std::vector<FamilySize> sizes(std::initializer_list<std::int64_t> v) {
  std::vector<FamilySize> out;
  for (auto k : v) out.push_back(FamilySize{k});
  return out;
}

void check_interior_recursion(const SampledTree& tree, const SolutionLayer& layer) {
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (n.depth >= layer.boundary_depth) continue;
    if (n.family.count == FamilySize::kInfinite) {
      CHECK(layer.values[i] == 1.0);
      continue;
    }
    double prod = 1.0;
    for (std::int64_t c = 0; c < n.family.count; ++c)
      prod *= layer.values[static_cast<std::size_t>(n.first_child + c)];
    CHECK(layer.values[i] == 1.0 - prod);
  }
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* v) { ::setenv("RDE_LAB_THREADS", v, 1); }
  ~ThreadsEnv() { ::unsetenv("RDE_LAB_THREADS"); }
};

}  // namespace

TEST_CASE("sample_tree: complete binary tree") {
  RngStream rng(1);
  const auto t = sample_tree(kBinary, 3, rng);
  CHECK(t.size() == 15);
  CHECK(t.boundary_count() == 8);
  CHECK_NOTHROW(t.validate());
  const auto a = t.address(14);
  CHECK(a == std::vector<int>{2, 2, 2});
  CHECK(t.find(a) == std::optional<std::size_t>{14});
  CHECK(t.address(0).empty());
  CHECK_FALSE(t.find(std::vector<int>{3}).has_value());
}

TEST_CASE("sample_tree: geometric node count") {
  constexpr int kTrees = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < kTrees; ++r) {
    RngStream rng(7, static_cast<std::uint64_t>(r));
    const double n = static_cast<double>(sample_tree(kGeo, 2, rng).size());
    sum += n;
    sum2 += n * n;
  }
  const double mean = sum / kTrees;
  const double se = std::sqrt((sum2 / kTrees - mean * mean) / kTrees);
  CHECK(std::abs(mean - 21.0) <= 3 * se);
}

TEST_CASE("sample_tree: root of the half-infinite law") {
  constexpr int kTrees = 20000;
  int infinite = 0;
  for (int r = 0; r < kTrees; ++r) {
    RngStream rng(8, static_cast<std::uint64_t>(r));
    const auto t = sample_tree(kHalfInfinite, 1, rng);
    const auto c = t.node(0).family.count;
    REQUIRE((c == 2 || c == FamilySize::kInfinite));
    if (c == FamilySize::kInfinite) {
      ++infinite;
      CHECK(t.size() == 1);
    } else {
      CHECK(t.size() == 3);
    }
  }
  CHECK(std::abs(infinite / double(kTrees) - 0.5) <= 4 * std::sqrt(0.25 / kTrees));
}

TEST_CASE("sample_tree: node cap") {
  RngStream rng(1);
  CHECK_THROWS_AS(sample_tree(kBinary, 20, rng, kDefaultExplorationBudget, 1000), ResourceError);
  CHECK_THROWS_AS(sample_tree(kBinary, -1, rng), ValidationError);
}

TEST_CASE("from_family_sizes builds and validates trees") {
  // root -> [a, b]; a has one child on the boundary, b is an infinite leaf.
  const auto t = SampledTree::from_family_sizes(2, sizes({2, 1, FamilySize::kInfinite}));
  CHECK(t.size() == 4);
  CHECK(t.boundary_count() == 1);
  CHECK(t.address(3) == std::vector<int>{1, 1});
  CHECK_THROWS_AS(SampledTree::from_family_sizes(2, sizes({2, 1, FamilySize::kInfinite, 3})),
                  ValidationError);
  CHECK_THROWS_AS(SampledTree::from_family_sizes(2, sizes({2, 1})), ValidationError);
  CHECK_THROWS_AS(SampledTree::from_family_sizes(1, sizes({0})), ValidationError);
}

TEST_CASE("conditional_solution: documented values") {
  RngStream rng(1);
  const double mu1 = oracle::kGolden;
  const auto t1 = sample_tree(kBinary, 1, rng);
  CHECK(conditional_solution(t1, mu1).root() == doctest::Approx(mu1).epsilon(1e-15));

  const auto t0 = sample_tree(kGeo, 0, rng);
  CHECK(t0.size() == 1);
  CHECK(conditional_solution(t0, 0.3).root() == 0.3);

  const auto inf = SampledTree::from_family_sizes(3, sizes({FamilySize::kInfinite}));
  CHECK(conditional_solution(inf, 0.3).root() == 1.0);
}

TEST_CASE("discrete_solution: documented values") {
  RngStream rng(2);
  const auto t = sample_tree(kBinary, 1, rng);
  const std::vector<std::uint8_t> ones{1, 1}, one_zero{1, 0};
  CHECK(discrete_solution(t, ones).root() == 0.0);
  CHECK(discrete_solution(t, one_zero).root() == 1.0);

  const auto s = discrete_solution(t, 0.5, rng);
  CHECK(s.kind == SolutionKind::DiscreteS);
  for (double v : s.values) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("discrete_solution: root mean is mu1") {
  const double mu1 = solve_mu1(Pgf(kBinary));
  const auto recs = run_replicates(kBinary, 8, 100000, 11, mu1, true);
  double sum = 0.0;
  for (const auto& r : recs) sum += r.root_s;
  const double mean = sum / static_cast<double>(recs.size());
  const double se = std::sqrt(mu1 * (1 - mu1) / static_cast<double>(recs.size()));
  CHECK(std::abs(mean - mu1) <= 3 * se);
}

TEST_CASE("mc_moments: binary tree is deterministic") {
  const auto m = mc_moments(kBinary, 12, 1000, 3);
  CHECK(std::abs(m.mean_c - oracle::kGolden) < 1e-15);
  CHECK(std::abs(m.m2_c - oracle::kGolden * oracle::kGolden) < 1e-15);
  CHECK(m.se_mean == 0.0);
  CHECK(m.se_m2 == 0.0);
  CHECK(m.reps == 1000);
  CHECK(m.depth == 12);
}

TEST_CASE("mc_moments: half-infinite law matches exact finite-depth moments") {
  const Pgf h(kHalfInfinite);
  const double mu1 = solve_mu1(h);
  const auto m = mc_moments(kHalfInfinite, 12, 100000, 4);
  const auto exact = oracle::conditional_moments([](double s) { return 0.5 * s * s; }, mu1, 12);
  CHECK(std::abs(m.mean_c - exact.m1) <= 3 * m.se_mean);
  CHECK(std::abs(m.m2_c - exact.m2) <= 3 * m.se_m2);
  CHECK(std::abs(exact.m1 - oracle::kSqrt3m1) < 1e-12);
  // The finite-depth second moment approaches mu1 only slowly.
  CHECK(exact.m2 < exact.m1 - 1e-3);
  const auto deep = oracle::conditional_moments([](double s) { return 0.5 * s * s; }, mu1, 40);
  CHECK(std::abs(deep.m2 - oracle::kSqrt3m1) < 1e-6);
}

TEST_CASE("mc_moments: depth 0 is exact") {
  const auto m = mc_moments(kGeo, 0, 100, 5);
  CHECK(m.mean_c == solve_mu1(Pgf(kGeo)));
  CHECK(m.se_mean == 0.0);
  CHECK_THROWS_AS(mc_moments(kGeo, 0, 99, 5), ValidationError);
}

TEST_CASE("endogeny_diagnostic: documented values") {
  const auto b = endogeny_diagnostic(kBinary, 10, 20000, 6);
  const double gap = oracle::kGolden - oracle::kGoldenSq;
  CHECK(std::abs(b.e_c_one_minus_c - gap) <= 3 * b.se_e + 1e-12);
  CHECK(std::abs(b.p_disagree - 2 * b.e_c_one_minus_c) <= 3 * b.se_p + 1e-12);

  const auto h = endogeny_diagnostic(kHalfInfinite, 12, 50000, 7);
  const double mu1 = oracle::kSqrt3m1;
  const auto exact = oracle::conditional_moments([](double s) { return 0.5 * s * s; }, mu1, 12);
  CHECK(std::abs(h.e_c_one_minus_c - (exact.m1 - exact.m2)) <= 3 * h.se_e);
  CHECK(std::abs(h.p_disagree - 2 * (exact.m1 - exact.m2)) <= 3 * h.se_p);

  const auto deep = endogeny_diagnostic(kHalfInfinite, 40, 50000, 7);
  CHECK(deep.e_c_one_minus_c <= 3 * deep.se_e + 1e-6);
  CHECK(deep.p_disagree <= 3 * deep.se_p + 1e-6);
}

TEST_CASE("iterated_conditional: documented values") {
  const Pgf bp(kBinary);
  const auto fixed = make_two_cycle(bp, solve_mu1(bp));
  const auto a = iterated_conditional(kBinary, fixed, 3, 200, 9);
  const auto b = mc_moments(kBinary, 6, 200, 9);
  CHECK(a.mean_c == b.mean_c);
  CHECK(a.m2_c == b.m2_c);

  const auto one = find_two_cycles(bp).cycles.at(0);
  CHECK(iterated_conditional(kBinary, one, 4, 100, 9).mean_c == 1.0);

  // The pair (0.2, 16/17) is a neutral cycle of the geometric law. Half
  // depth 3 keeps the trees (4^6 nodes on average) well under the cap.
  const Pgf gp(kGeo);
  const auto g = make_two_cycle(gp, 0.2);
  CHECK(g.mu_minus == doctest::Approx(16.0 / 17.0).epsilon(1e-14));
  const auto m = iterated_conditional(kGeo, g, 3, 5000, 10);
  CHECK(std::abs(m.mean_c - 0.2) <= 3 * m.se_mean);
}

TEST_CASE("property: conditional value equals the boundary enumeration") {
  int checked = 0;
  gen::for_cases(300, 100, [&](gen::Case& c) {
    const auto law = gen::finite_law(c, 4, true);
    const int depth = c.integer(1, 4);
    RngStream rng(c.seed);
    const auto tree = sample_tree(law.spec(), depth, rng);
    const std::size_t leaves = tree.boundary_count();
    if (leaves > 12) return;
    ++checked;
    const double mu1 = solve_mu1(Pgf(law.spec()));
    const double c_root = conditional_solution(tree, mu1).root();
    std::vector<std::uint8_t> buf(leaves);
    const double brute = oracle::enumerate_boundary(leaves, mu1, [&](const std::vector<int>& bits) {
      for (std::size_t i = 0; i < leaves; ++i) buf[i] = static_cast<std::uint8_t>(bits[i]);
      return static_cast<int>(discrete_solution(tree, buf).root());
    });
    CAPTURE(c.seed);
    CHECK(std::abs(c_root - brute) < 1e-12);
  });
  CHECK(checked > 100);
}

TEST_CASE("property: interior recursion holds node by node") {
  gen::for_cases(100, 200, [](gen::Case& c) {
    const auto spec = gen::any_spec(c);
    RngStream rng(c.seed);
    SampledTree tree;
    try {
      tree = sample_tree(spec, c.integer(0, 5), rng, 10000, 200000);
    } catch (const ResourceError&) {
      return;
    }
    CAPTURE(c.seed);
    CHECK_NOTHROW(tree.validate());
    const double mu1 = c.uniform(0.0, 1.0);
    const auto cl = conditional_solution(tree, mu1);
    check_interior_recursion(tree, cl);
    const auto sl = discrete_solution(tree, mu1, rng);
    check_interior_recursion(tree, sl);
    if (tree.depth() > 1) {
      const auto shallow = conditional_solution(tree, mu1, tree.depth() - 1);
      check_interior_recursion(tree, shallow);
    }
  });
}

TEST_CASE("property: depth coupling increments shrink with depth") {
  for (const auto& spec : {kHalfInfinite, OffspringSpec::finite({0.5, 0.0, 0.5})}) {
    CAPTURE(spec.describe());
    const double mu1 = solve_mu1(Pgf(spec));
    constexpr int kReps = 10000;
    std::vector<double> inc(13, 0.0);
    for (int r = 0; r < kReps; ++r) {
      RngStream rng(12, static_cast<std::uint64_t>(r));
      const auto tree = sample_tree(spec, 12, rng);
      const auto roots = conditional_roots_by_depth(tree, mu1);
      REQUIRE(roots.size() == 13);
      for (int n = 0; n < 12; ++n) inc[static_cast<std::size_t>(n)] += std::abs(roots[n + 1] - roots[n]);
    }
    for (int n = 3; n < 12; ++n) {
      CAPTURE(n);
      CHECK(inc[static_cast<std::size_t>(n)] < inc[static_cast<std::size_t>(n - 1)]);
    }
  }
}

TEST_CASE("replicates do not depend on the thread count") {
  const auto spec = OffspringSpec::thinned(kBinary, 0.4);
  std::vector<ReplicateRecord> one, many;
  {
    ThreadsEnv env("1");
    one = run_replicates(spec, 6, 2000, 13, 0.6, true);
  }
  {
    ThreadsEnv env("4");
    many = run_replicates(spec, 6, 2000, 13, 0.6, true);
  }
  REQUIRE(one.size() == many.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].root_c == many[i].root_c);
    CHECK(one[i].root_s == many[i].root_s);
    CHECK(one[i].root_s2 == many[i].root_s2);
  }
}

TEST_CASE("resource errors propagate from the replicate loop") {
  SimOptions opt;
  opt.node_cap = 100;
  CHECK_THROWS_AS(mc_moments(kGeo, 10, 100, 1, opt), ResourceError);
}
