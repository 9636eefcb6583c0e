#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "generators.hpp"
#include "oracles.hpp"
#include "rdelab/distiter.hpp"
#include "rdelab/errors.hpp"

using namespace rdelab;

namespace {

const auto kBinary = OffspringSpec::deterministic(2);
const auto kHalfInfinite = OffspringSpec::finite({0.0, 0.5}, 0.5);

constexpr std::size_t kM = 100000;

}  // namespace

TEST_CASE("EmpiricalDist validates its points") {
  CHECK_THROWS_AS(EmpiricalDist(std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(EmpiricalDist({0.2, 1.1}), ValidationError);
  CHECK_THROWS_AS(EmpiricalDist({-0.1}), ValidationError);
  CHECK_THROWS_AS(EmpiricalDist({std::nan("")}), ValidationError);
  const EmpiricalDist d({0.0, 0.5, 1.0});
  CHECK(d.mean() == doctest::Approx(0.5));
  CHECK(d.second_moment() == doctest::Approx(1.25 / 3));
  const auto pm = EmpiricalDist::point_mass(0.3, 10);
  CHECK(pm.size() == 10);
  CHECK(pm.mean() == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(pm.se_mean() == 0.0);
}

TEST_CASE("read_csv: header, extra columns and errors") {
  std::istringstream ok("x,weight\n0.1,3\n\n0.5\n 0.9 \n");
  const auto d = EmpiricalDist::read_csv(ok);
  REQUIRE(d.size() == 3);
  CHECK(d.points()[0] == 0.1);
  CHECK(d.points()[2] == 0.9);

  std::istringstream bad("0.1\nabc\n");
  CHECK_THROWS_AS(EmpiricalDist::read_csv(bad), ValidationError);
  std::istringstream range("0.1\n1.5\n");
  CHECK_THROWS_AS(EmpiricalDist::read_csv(range), ValidationError);
  std::istringstream empty("points\n");
  CHECK_THROWS_AS(EmpiricalDist::read_csv(empty), ValidationError);
  CHECK_THROWS_AS(EmpiricalDist::load_csv("/nonexistent/points.csv"), ValidationError);
}

TEST_CASE("apply_T: documented values") {
  const double mu1 = oracle::kGolden;
  RngStream rng(1);
  const auto out = apply_T(EmpiricalDist::point_mass(mu1, 10), kHalfInfinite, rng, kM);
  const double mu1h = oracle::kSqrt3m1;
  const auto out_h = apply_T(EmpiricalDist::point_mass(mu1h, 10), kHalfInfinite, rng, kM);
  for (double x : out_h.points()) CHECK((x == 1.0 || x == doctest::Approx(1 - mu1h * mu1h)));
  CHECK(std::abs(out_h.mean() - mu1h) <= 3 * out_h.se_mean());

  for (double x : out.points()) REQUIRE((x == 1.0 || x == doctest::Approx(1 - mu1 * mu1)));

  const auto geo = OffspringSpec::geometric(0.25);
  const double mg = oracle::geometric_mu1(0.25);
  const auto out_g = apply_T(EmpiricalDist::point_mass(mg, 1), geo, rng, kM);
  CHECK(std::abs(out_g.mean() - mg) <= 3 * out_g.se_mean());

  const auto zeros = apply_T(EmpiricalDist::point_mass(1.0, 5), kBinary, rng, 1000);
  CHECK(std::all_of(zeros.points().begin(), zeros.points().end(), [](double x) { return x == 0.0; }));
  const auto ones = apply_T(EmpiricalDist::point_mass(0.0, 5), geo, rng, 1000);
  CHECK(std::all_of(ones.points().begin(), ones.points().end(), [](double x) { return x == 1.0; }));
}

TEST_CASE("apply_T does not depend on the thread count") {
  RngStream seed_rng(3);
  const auto nu = mean_matched_uniform(0.6, 20000, seed_rng);
  const auto spec = OffspringSpec::thinned(kBinary, 0.4);
  ::setenv("RDE_LAB_THREADS", "1", 1);
  RngStream a(9);
  const auto one = apply_T(nu, spec, a, 50000);
  ::setenv("RDE_LAB_THREADS", "3", 1);
  RngStream b(9);
  const auto three = apply_T(nu, spec, b, 50000);
  ::unsetenv("RDE_LAB_THREADS");
  CHECK(one.points() == three.points());
}

TEST_CASE("mean_matched_uniform and bernoulli_sample") {
  RngStream rng(4);
  const auto u = mean_matched_uniform(oracle::kGolden, kM, rng);
  CHECK(std::abs(u.mean() - oracle::kGolden) < 1e-14);
  CHECK_FALSE(is_discrete_concentrated(u));
  const auto b = bernoulli_sample(oracle::kGolden, kM, rng);
  CHECK(is_discrete_concentrated(b));
  CHECK(std::abs(b.mean() - oracle::kGolden) <= 4 * b.se_mean());
}

TEST_CASE("anchor_mean hits the target and fixes 0 and 1") {
  RngStream rng(5);
  auto u = mean_matched_uniform(0.5, 5000, rng);
  std::vector<double> pts = u.points();
  pts[0] = 0.0;
  pts[1] = 1.0;
  EmpiricalDist d(pts);
  for (double target : {0.1, 0.4, 0.62, 0.95}) {
    CAPTURE(target);
    REQUIRE(anchor_mean(d, target));
    CHECK(std::abs(d.mean() - target) < 1e-13);
    CHECK(d.points()[0] == 0.0);
    CHECK(d.points()[1] == 1.0);
  }
  auto b = EmpiricalDist({0.0, 1.0, 1.0, 0.0});
  CHECK_FALSE(anchor_mean(b, 0.3));
  CHECK(b.mean() == 0.5);
}

TEST_CASE("kolmogorov distances") {
  RngStream rng(6);
  const auto u = mean_matched_uniform(0.5, 10000, rng);
  CHECK(kolmogorov_distance(u, u) == 0.0);
  CHECK(kolmogorov_distance(EmpiricalDist::point_mass(0.0, 10), EmpiricalDist::point_mass(1.0, 10)) ==
        doctest::Approx(1.0));
  const auto b = bernoulli_sample(0.7, kM, rng);
  CHECK(kolmogorov_to_discrete(b, 0.7) < 0.01);
  CHECK(kolmogorov_to_discrete(EmpiricalDist::point_mass(0.5, 10), 0.7) == doctest::Approx(0.7));
}

TEST_CASE("iterate_T: documented values") {
  const Pgf bp(kBinary);
  const double mu1 = solve_mu1(bp), mu2 = solve_mu2(bp, mu1);

  SUBCASE("mean-mu1 continuous start converges to the endogenous moments") {
    RngStream rng(7);
    const auto nu0 = mean_matched_uniform(mu1, kM, rng);
    IterateOptions opt;
    opt.anchor_mean = true;
    const auto traj = iterate_T(nu0, kBinary, 30, rng, opt);
    REQUIRE(traj.size() == 31);
    CHECK(traj.front().k == 0);
    const auto& last = traj.back();
    CHECK(std::abs(last.m1 - mu1) < 1e-12);
    CHECK(std::abs(last.m2 - mu2) <= 4 * last.se_m2 + 1e-4);
  }
  SUBCASE("the discrete law is invariant") {
    RngStream rng(8);
    const auto nu0 = bernoulli_sample(mu1, kM, rng);
    IterateOptions opt;
    opt.target = DiscreteTarget{mu1};
    const auto traj = iterate_T(nu0, kBinary, 10, rng, opt);
    for (const auto& t : traj) {
      CHECK(t.m2 == t.m1);
      REQUIRE(t.kolmogorov.has_value());
      CHECK(*t.kolmogorov < 0.05);
    }
  }
  SUBCASE("stable law contracts from a point mass") {
    RngStream rng(9);
    const auto traj = iterate_T(EmpiricalDist::point_mass(0.2, kM), kHalfInfinite, 30, rng);
    const auto& last = traj.back();
    CHECK(std::abs(last.m1 - oracle::kSqrt3m1) <= 4 * last.se_m1);
  }
}

TEST_CASE("moment_recursions: documented values") {
  const Pgf bp(kBinary);
  const double mu1 = solve_mu1(bp), mu2 = solve_mu2(bp, mu1);

  const auto fixed = moment_recursions(bp, mu1, mu2, mu2, mu1, 20);
  for (const auto& t : fixed) {
    CHECK(t.m1 == doctest::Approx(mu1).epsilon(1e-13));
    CHECK(t.m2 == doctest::Approx(mu2).epsilon(1e-12));
    CHECK(std::abs(*t.e) < 1e-12);
  }

  const auto conv = moment_recursions(bp, mu1, 0.45, 0.45 * mu1 - 0.05, mu1, 200);
  CHECK(std::abs(conv.back().m2 - oracle::kGoldenSq) < 1e-10);
  CHECK(std::abs(*conv.back().e) < 1e-10);

  const auto osc = moment_recursions(bp, 0.5, 0.25, 0.25 * mu1, mu1, 60);
  CHECK(osc[60].m1 < 1e-6);
  CHECK(osc[59].m1 > 1 - 1e-6);
}

TEST_CASE("property: mean transport law") {
  gen::for_cases(30, 300, [](gen::Case& c) {
    const auto spec = gen::any_spec(c);
    RngStream rng(c.seed);
    std::vector<double> pts(20000);
    const double shape = c.uniform(0.2, 5.0);
    for (auto& x : pts) x = c.coin(0.1) ? static_cast<double>(c.coin()) : std::pow(rng.uniform(), shape);
    const EmpiricalDist nu(pts);
    const auto out = apply_T(nu, spec, rng, 50000, 2000);
    const double expected = 1.0 - Pgf(spec).eval(nu.mean());
    CAPTURE(c.seed);
    CAPTURE(spec.describe());
    CHECK(std::abs(out.mean() - expected) <= 4 * out.se_mean() + 1e-12);
  });
}

TEST_CASE("property: the second-moment recursion has exactly the two documented fixed points") {
  gen::for_cases(100, 400, [](gen::Case& c) {
    const auto spec = gen::any_spec(c);
    const Pgf h(spec);
    const double mu1 = solve_mu1(h), mu2 = solve_mu2(h, mu1);
    CAPTURE(c.seed);
    CAPTURE(spec.describe());
    for (double m2 : {mu1, mu2}) {
      const auto t = moment_recursions(h, mu1, m2, m2, mu1, 1);
      CHECK(std::abs(t[1].m2 - m2) < 1e-11);
    }
    // Away from both, a single step moves the second moment.
    const double lo = std::min(mu1, mu2), hi = std::max(mu1, mu2);
    for (double m2 : {mu1 * mu1 + 0.3 * (lo - mu1 * mu1), 0.5 * (lo + hi)}) {
      if (std::abs(m2 - mu1) < 1e-6 || std::abs(m2 - mu2) < 1e-6) continue;
      const auto t = moment_recursions(h, mu1, m2, m2 * mu1, mu1, 1);
      CHECK(std::abs(t[1].m2 - m2) > 1e-12);
    }
  });
}

TEST_CASE("property: E_k stays nonnegative from coupled starting triples") {
  gen::for_cases(200, 500, [](gen::Case& c) {
    const auto spec = gen::any_spec(c);
    const Pgf h(spec);
    const double mu1 = solve_mu1(h), mu2 = solve_mu2(h, mu1);
    // X = a C + b (1 - C) + (1 - a - b) Y with Y independent of C.
    const double a = c.uniform(0, 1), b = c.uniform(0, 1 - a), w = 1 - a - b;
    const double ym = c.uniform(0, 1), ys = c.uniform(ym * ym, ym);
    const double m1 = a * mu1 + b * (1 - mu1) + w * ym;
    const double ec2 = mu2, ec = mu1;
    const double m2 = a * a * ec2 + b * b * (1 - 2 * ec + ec2) + w * w * ys + 2 * a * b * (ec - ec2) +
                      2 * a * w * ec * ym + 2 * b * w * (1 - ec) * ym;
    const double r = a * ec2 + b * (ec - ec2) + w * ec * ym;
    REQUIRE(r <= std::sqrt(m2 * mu2) + 1e-12);
    CAPTURE(c.seed);
    CAPTURE(spec.describe());
    for (const auto& t : moment_recursions(h, m1, m2, r, mu1, 40)) {
      CHECK(*t.e >= -1e-12);
      CHECK(t.m2 <= t.m1 + 1e-12);
    }
  });
}

TEST_CASE("property: empirical second moments track the recursion") {
  struct Setup {
    OffspringSpec spec;
    bool anchor;
  };
  for (const auto& s : {Setup{kBinary, true}, Setup{kHalfInfinite, false},
                        Setup{OffspringSpec::geometric(0.5), true}}) {
    CAPTURE(s.spec.describe());
    const Pgf h(s.spec);
    const double mu1 = solve_mu1(h);
    RngStream rng(10);
    const auto nu0 = mean_matched_uniform(mu1, kM, rng);
    IterateOptions opt;
    opt.anchor_mean = s.anchor;
    const auto emp = iterate_T(nu0, s.spec, 12, rng, opt);
    const auto rec = moment_recursions(h, nu0.mean(), nu0.second_moment(), nu0.mean() * mu1, mu1, 12);
    for (std::size_t k = 0; k < emp.size(); ++k) {
      CAPTURE(k);
      CHECK(std::abs(emp[k].m1 - rec[k].m1) <= 4 * emp[k].se_m1 + 1e-12);
      CHECK(std::abs(emp[k].m2 - rec[k].m2) <= 4 * emp[k].se_m2 + 1e-12);
    }
  }
}

TEST_CASE("basin_test: documented values") {
  const Pgf bp(kBinary);
  const double mu1 = solve_mu1(bp);
  IterateOptions opt;
  opt.anchor_mean = true;

  RngStream rng(11);
  const auto in = basin_test(mean_matched_uniform(mu1, kM, rng), kBinary, 30, 1e-6, rng, opt);
  CHECK(in.analytic == BasinVerdict::InBasin);
  CHECK(in.empirical == BasinVerdict::InBasin);
  CHECK_FALSE(in.stable);

  const auto half = basin_test(mean_matched_uniform(0.5, kM, rng), kBinary, 30, 1e-6, rng, opt);
  CHECK(half.analytic == BasinVerdict::NotInBasin);
  CHECK(half.empirical == BasinVerdict::NotInBasin);

  const auto disc = basin_test(bernoulli_sample(mu1, kM, rng), kBinary, 30, 0.01, rng, opt);
  CHECK(disc.discrete_concentrated);
  CHECK(disc.analytic == BasinVerdict::NotInBasin);
  CHECK(disc.empirical == BasinVerdict::NotInBasin);

  const auto near = basin_test(mean_matched_uniform(mu1 + 5e-6, 1000, rng), kBinary, 1, 1e-6, rng);
  CHECK(near.analytic == BasinVerdict::Boundary);

  const auto stable = basin_test(EmpiricalDist::point_mass(0.2, kM), kHalfInfinite, 30, 1e-6, rng);
  CHECK(stable.stable);
  CHECK(stable.mean_basin == BasinKind::ToMu1);
  CHECK(stable.analytic == BasinVerdict::InBasin);
  CHECK(stable.empirical == BasinVerdict::InBasin);

  CHECK_THROWS_AS(basin_test(EmpiricalDist::point_mass(0.2, 10), kBinary, 1, 0.0, rng), ValidationError);
}
