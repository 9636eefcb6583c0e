#include "rdelab/pgf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "rdelab/errors.hpp"

namespace rdelab {

namespace {

constexpr double kMassTolerance = 1e-12;
constexpr int kMaxFixedPointSteps = 100000;
constexpr double kSingularSlope = 1e-9;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_argument(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    std::ostringstream os;
    os << "generating function argument " << s << " outside [0, 1]";
    throw DomainError(os.str());
  }
}

// Truncated product of power series a * b, keeping orders 0..n.
std::vector<double> series_mul(const std::vector<double>& a, const std::vector<double>& b,
                               std::size_t n) {
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t i = 0; i < a.size() && i <= n; ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size() && i + j <= n; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// OffspringSpec

OffspringSpec OffspringSpec::deterministic(int d) {
  OffspringSpec s{Deterministic{d}};
  s.validate();
  return s;
}

OffspringSpec OffspringSpec::geometric(double alpha) {
  OffspringSpec s{Geometric{alpha}};
  s.validate();
  return s;
}

OffspringSpec OffspringSpec::finite(std::vector<double> weights, double infinity_mass) {
  OffspringSpec s{FinitePmf{std::move(weights), infinity_mass}};
  s.validate();
  return s;
}

OffspringSpec OffspringSpec::thinned(OffspringSpec base, double p) {
  OffspringSpec s{Thinned{std::make_shared<const OffspringSpec>(std::move(base)), p}};
  s.validate();
  return s;
}

void OffspringSpec::validate() const {
  std::visit(
      Overloaded{
          [](const Deterministic& d) {
            if (d.d < 2)
              throw ValidationError("deterministic family size must be >= 2 (P(2 <= N < inf) = 0)");
          },
          [](const Geometric& g) {
            if (!(g.alpha > 0.0 && g.alpha < 1.0))
              throw ValidationError("geometric alpha must lie in (0, 1)");
          },
          [](const FinitePmf& f) {
            if (f.weights.empty() && f.infinity_mass == 0.0)
              throw ValidationError("finite law has no mass");
            double total = f.infinity_mass;
            if (!(std::isfinite(f.infinity_mass) && f.infinity_mass >= 0.0))
              throw ValidationError("mass at infinity must be a finite nonnegative number");
            for (double w : f.weights) {
              if (!(std::isfinite(w) && w >= 0.0))
                throw ValidationError("probability weights must be finite and nonnegative");
              total += w;
            }
            if (std::abs(total - 1.0) > kMassTolerance) {
              std::ostringstream os;
              os.precision(17);
              os << "total mass " << total << " differs from 1";
              throw ValidationError(os.str());
            }
          },
          [](const Thinned& t) {
            if (!t.base) throw ValidationError("thinned law is missing its base law");
            t.base->validate();
            if (!(t.p > 0.0 && t.p < 1.0))
              throw ValidationError("thinning probability p must lie in (0, 1)");
          },
      },
      v_);
}

bool OffspringSpec::is_branching() const {
  return std::visit(
      Overloaded{
          [](const Deterministic& d) { return d.d >= 2; },
          [](const Geometric&) { return true; },
          [](const FinitePmf& f) {
            double m = 0.0;
            for (std::size_t k = 1; k < f.weights.size(); ++k) m += f.weights[k];
            return m > 0.0;
          },
          [](const Thinned& t) { return t.base && t.base->is_branching(); },
      },
      v_);
}

void OffspringSpec::require_branching() const {
  validate();
  if (!is_branching())
    throw ValidationError(
        "P(2 <= N < infinity) = 0: the generating function is not strictly convex");
}

std::string OffspringSpec::describe() const {
  std::ostringstream os;
  os.precision(12);
  std::visit(Overloaded{
                 [&](const Deterministic& d) { os << "deterministic(" << d.d << ")"; },
                 [&](const Geometric& g) { os << "geometric(alpha=" << g.alpha << ")"; },
                 [&](const FinitePmf& f) {
                   os << "finite{";
                   bool first = true;
                   for (std::size_t k = 0; k < f.weights.size(); ++k) {
                     if (f.weights[k] == 0.0) continue;
                     os << (first ? "" : ", ") << k + 1 << ": " << f.weights[k];
                     first = false;
                   }
                   if (f.infinity_mass > 0.0) os << (first ? "" : ", ") << "inf: " << f.infinity_mass;
                   os << "}";
                 },
                 [&](const Thinned& t) {
                   os << "thinned(p=" << t.p << ", " << t.base->describe() << ")";
                 },
             },
             v_);
  return os.str();
}

// ---------------------------------------------------------------------------
// Pgf

Pgf::Pgf(OffspringSpec spec, double tolerance) : spec_(std::move(spec)), tolerance_(tolerance) {
  spec_.validate();
  if (const auto* th = std::get_if<OffspringSpec::Thinned>(&spec_.variant()))
    base_ = std::make_shared<const Pgf>(*th->base, tolerance);
}

double Pgf::eval(double s) const {
  check_argument(s);
  return std::visit(
      Overloaded{
          [&](const OffspringSpec::Deterministic& d) { return std::pow(s, d.d); },
          [&](const OffspringSpec::Geometric& g) {
            if (s == 1.0) return 1.0;
            return std::min(1.0, g.alpha * s / (1.0 - (1.0 - g.alpha) * s));
          },
          [&](const OffspringSpec::FinitePmf& f) {
            double acc = 0.0;
            for (auto it = f.weights.rbegin(); it != f.weights.rend(); ++it) acc = (acc + *it) * s;
            return std::min(1.0, acc);
          },
          [&](const OffspringSpec::Thinned&) { return thinned_eval(s); },
      },
      spec_.variant());
}

// Least fixed point of h -> G(p h + q s), approached monotonically from h = 0.
// Each step takes the larger of the plain iterate G(p h + q s) and the Newton
// iterate; both stay below the least root for a convex increasing map, and the
// Newton step keeps convergence fast when the root is a double root (s = 1 at
// the critical thinning).
double Pgf::thinned_eval(double s) const {
  const auto& th = std::get<OffspringSpec::Thinned>(spec_.variant());
  const Pgf& base = *base_;
  const double p = th.p;
  const double q = 1.0 - p;
  auto arg = [&](double h) { return std::min(1.0, p * h + q * s); };
  auto phi = [&](double h) { return base.eval(arg(h)) - h; };

  // At s = 1 the root h = 1 is double when p G'(1) = 1, and iteration only
  // resolves it to about sqrt(machine epsilon). The least root is 1 exactly
  // whenever the pruned process p-thinned from G is (sub)critical.
  if (s == 1.0 && base.defect() <= 1e-15 && p * base.deriv_at_one() <= 1.0) return 1.0;

  double h = 0.0;
  double f = phi(h);
  for (int it = 0; it < kMaxFixedPointSteps && f > 0.0; ++it) {
    double next = h + f;
    double gp = std::numeric_limits<double>::quiet_NaN();
    try {
      gp = base.deriv(arg(h));
    } catch (const DomainError&) {
    }
    const double slope = 1.0 - p * gp;
    if (std::isfinite(gp) && slope > 0.0 && slope < 1.0) {
      double newton = std::min(1.0, h + f / slope);
      for (int k = 0; k < 64 && newton > next && phi(newton) < -1e-15; ++k)
        newton = 0.5 * (newton + next);
      next = std::max(next, newton);
    }
    next = std::min(next, 1.0);
    const double step = next - h;
    h = next;
    f = phi(h);
    if (step < tolerance_) break;
  }
  return std::clamp(h, 0.0, 1.0);
}

double Pgf::deriv(double s) const {
  check_argument(s);
  return std::visit(
      Overloaded{
          [&](const OffspringSpec::Deterministic& d) {
            return static_cast<double>(d.d) * std::pow(s, d.d - 1);
          },
          [&](const OffspringSpec::Geometric& g) {
            const double den = 1.0 - (1.0 - g.alpha) * s;
            return g.alpha / (den * den);
          },
          [&](const OffspringSpec::FinitePmf& f) {
            double acc = 0.0;
            for (std::size_t k = f.weights.size(); k >= 1; --k)
              acc = acc * s + static_cast<double>(k) * f.weights[k - 1];
            return acc;
          },
          [&](const OffspringSpec::Thinned&) { return thinned_deriv(s); },
      },
      spec_.variant());
}

// Implicit differentiation of H = G(pH + qs): H' = q G'(w) / (1 - p G'(w)).
// Near the square-root singularity the formula degenerates and a five-point
// stencil is used instead.
double Pgf::thinned_deriv(double s) const {
  const auto& th = std::get<OffspringSpec::Thinned>(spec_.variant());
  const double p = th.p;
  const double q = 1.0 - p;
  const double w = std::min(1.0, p * eval(s) + q * s);
  double gp = std::numeric_limits<double>::quiet_NaN();
  try {
    gp = base_->deriv(w);
  } catch (const DomainError&) {
  }
  if (std::isfinite(gp) && p * gp < 1.0 - kSingularSlope) return q * gp / (1.0 - p * gp);

  const double room = std::min(1.0 - s, s);
  if (room < 1e-12) {
    std::ostringstream os;
    os << "derivative of " << spec_.describe() << " diverges at s = " << s;
    throw DomainError(os.str());
  }
  const double step = std::min(1e-4, room / 4.0);
  return (eval(s - 2 * step) - 8 * eval(s - step) + 8 * eval(s + step) - eval(s + 2 * step)) /
         (12 * step);
}

double Pgf::deriv_at_one() const {
  if (!spec_.is<OffspringSpec::Thinned>()) return deriv(1.0);
  const auto& th = std::get<OffspringSpec::Thinned>(spec_.variant());
  const double w = std::min(1.0, th.p * eval(1.0) + (1.0 - th.p));
  double gp = std::numeric_limits<double>::infinity();
  try {
    gp = base_->deriv_at_one();
    if (w < 1.0) gp = base_->deriv(w);
  } catch (const DomainError&) {
    gp = std::numeric_limits<double>::infinity();
  }
  const double t = th.p * gp;
  if (std::isfinite(gp) && t < 1.0 - kSingularSlope) return (1.0 - th.p) * gp / (1.0 - t);
  return std::numeric_limits<double>::infinity();
}

double Pgf::defect() const { return 1.0 - eval(1.0); }

std::vector<double> Pgf::coefficients(int n) const {
  if (n < 0) throw DomainError("coefficient order must be nonnegative");
  const auto un = static_cast<std::size_t>(n);
  std::vector<double> c(un + 1, 0.0);
  std::visit(
      Overloaded{
          [&](const OffspringSpec::Deterministic& d) {
            if (d.d <= n) c[static_cast<std::size_t>(d.d)] = 1.0;
          },
          [&](const OffspringSpec::Geometric& g) {
            double term = g.alpha;
            for (std::size_t k = 1; k <= un; ++k) {
              c[k] = term;
              term *= 1.0 - g.alpha;
            }
          },
          [&](const OffspringSpec::FinitePmf& f) {
            for (std::size_t k = 1; k <= un && k <= f.weights.size(); ++k) c[k] = f.weights[k - 1];
          },
          [&](const OffspringSpec::Thinned& th) {
            // Solve H = G(pH + qz) order by order. Coefficient k of the right
            // side is g_1 p h_k plus terms involving only h_1..h_{k-1}.
            const std::vector<double> g = base_->coefficients(n);
            const double p = th.p;
            for (std::size_t k = 1; k <= un; ++k) {
              std::vector<double> u(k + 1, 0.0);
              for (std::size_t j = 1; j < k; ++j) u[j] = p * c[j];
              u[1] += 1.0 - p;
              std::vector<double> r{g[k]};
              for (std::size_t j = k; j-- > 0;) {
                r = series_mul(r, u, k);
                r[0] += g[j];
              }
              c[k] = r[k] / (1.0 - p * g[1]);
            }
          },
      },
      spec_.variant());
  return c;
}

Pgf Pgf::truncated(int n) const {
  if (n < 1) throw ValidationError("truncation level must be >= 1");
  const std::vector<double> c = coefficients(n - 1);
  std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
  double below = 0.0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    weights[k - 1] = c[k];
    below += c[k];
  }
  weights.back() = std::max(0.0, 1.0 - below);
  return Pgf(OffspringSpec::finite(std::move(weights), 0.0), tolerance_);
}

std::int64_t Pgf::ess_sup() const {
  return std::visit(Overloaded{
                        [](const OffspringSpec::Deterministic& d) -> std::int64_t { return d.d; },
                        [](const OffspringSpec::Geometric&) -> std::int64_t { return -1; },
                        [](const OffspringSpec::FinitePmf& f) -> std::int64_t {
                          if (f.infinity_mass > 0.0) return -1;
                          for (std::size_t k = f.weights.size(); k >= 1; --k)
                            if (f.weights[k - 1] > 0.0) return static_cast<std::int64_t>(k);
                          return -1;
                        },
                        [this](const OffspringSpec::Thinned&) -> std::int64_t {
                          return base_->ess_sup() == 1 ? 1 : -1;
                        },
                    },
                    spec_.variant());
}

double Pgf::thinning_residual(double s) const {
  const auto* th = std::get_if<OffspringSpec::Thinned>(&spec_.variant());
  if (!th) return 0.0;
  const double h = eval(s);
  return std::abs(h - base_->eval(std::min(1.0, th->p * h + (1.0 - th->p) * s)));
}

Pgf truncate_pgf(const Pgf& pgf, int n) { return pgf.truncated(n); }

// ---------------------------------------------------------------------------
// Sampling

FamilySampler::FamilySampler(const OffspringSpec& spec, std::int64_t budget)
    : kind_(spec.variant()), budget_(budget) {
  spec.validate();
  if (budget < 1) throw ValidationError("exploration budget must be >= 1");
  if (const auto* g = std::get_if<OffspringSpec::Geometric>(&kind_)) {
    log_beta_ = std::log1p(-g->alpha);
  } else if (const auto* f = std::get_if<OffspringSpec::FinitePmf>(&kind_)) {
    cdf_.resize(f->weights.size());
    std::partial_sum(f->weights.begin(), f->weights.end(), cdf_.begin());
  } else if (const auto* t = std::get_if<OffspringSpec::Thinned>(&kind_)) {
    base_ = std::make_shared<const FamilySampler>(*t->base, budget);
  }
}

FamilySize FamilySampler::operator()(RngStream& rng) const {
  return std::visit(
      Overloaded{
          [](const OffspringSpec::Deterministic& d) { return FamilySize{d.d}; },
          [&](const OffspringSpec::Geometric&) {
            // P(N > k) = beta^k, so N = 1 + floor(log U / log beta).
            const double x = std::floor(std::log(rng.uniform_pos()) / log_beta_);
            constexpr double kCap = 4.0e18;
            return FamilySize{1 + static_cast<std::int64_t>(std::min(x, kCap))};
          },
          [&](const OffspringSpec::FinitePmf& f) {
            const double u = rng.uniform();
            const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
            if (it != cdf_.end()) return FamilySize{1 + (it - cdf_.begin())};
            if (f.infinity_mass > 0.0) return FamilySize::infinite();
            // u landed in the rounding gap above the last partial sum.
            for (std::size_t k = f.weights.size(); k >= 1; --k)
              if (f.weights[k - 1] > 0.0) return FamilySize{static_cast<std::int64_t>(k)};
            return FamilySize{1};
          },
          [&](const OffspringSpec::Thinned& th) {
            std::int64_t pending = 1;
            std::int64_t explored = 0;
            std::int64_t stopped = 0;
            while (pending > 0) {
              --pending;
              if (++explored > budget_) return FamilySize::infinite();
              const FamilySize m = (*base_)(rng);
              if (m.is_infinite()) return FamilySize::infinite();
              std::int64_t cont = 0;
              if (m.count <= 32) {
                for (std::int64_t i = 0; i < m.count; ++i) cont += rng.bernoulli(th.p) ? 1 : 0;
              } else {
                std::binomial_distribution<std::int64_t> bin(m.count, th.p);
                cont = bin(rng);
              }
              stopped += m.count - cont;
              pending += cont;
            }
            return FamilySize{stopped};
          },
      },
      kind_);
}

FamilySize sample_family_size(const OffspringSpec& spec, RngStream& rng, std::int64_t budget) {
  return FamilySampler(spec, budget)(rng);
}

}  // namespace rdelab
