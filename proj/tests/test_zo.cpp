#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "support.hpp"
#include "zolr/zo.hpp"

using namespace zolr;
using zolr::gen::Gen;

namespace {

double sq_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

// Wraps an objective and counts calls.
template <class F>
struct Counted {
  F f;
  std::size_t calls = 0;
  double operator()(std::span<const double> x) {
    ++calls;
    return f(x);
  }
};
template <class F>
Counted(F) -> Counted<F>;

}  // namespace

TEST(Spsa, ScalarQuadraticIsExact) {
  Gen g(1);
  for (int t = 0; t < 1000; ++t) {
    const Vec theta{g.uniform(-50, 50)};
    const double c = g.uniform(1e-3, 5.0);
    const auto est = spsa_gradient([](std::span<const double> x) { return x[0] * x[0]; }, theta, c,
                                   g.seed());
    EXPECT_NEAR(est[0], 2.0 * theta[0], 1e-9 * (1.0 + std::abs(theta[0]) + c * c));
  }
}

// For f = |x|^2 the estimate is 2 D (D . theta), so coordinate i carries
// noise with variance sum_{j != i} (2 theta_j)^2. The mean of n draws must sit
// within four standard errors of the true gradient.
TEST(Spsa, UnbiasedOnQuadratic) {
  const Vec theta{1.0, -2.0, 0.5, 3.0};
  const int n = 10000;
  Vec mean(4, 0.0);
  for (int s = 0; s < n; ++s) {
    const auto g = spsa_gradient(sq_norm, theta, 0.1, derive_seed(7, s));
    for (int i = 0; i < 4; ++i) mean[i] += g[i] / n;
  }
  const double total = 4.0 * sq_norm(theta);
  for (int i = 0; i < 4; ++i) {
    const double se = std::sqrt((total - 4.0 * theta[i] * theta[i]) / n);
    EXPECT_NEAR(mean[i], 2.0 * theta[i], 4.0 * se) << "coordinate " << i;
  }
}

TEST(Spsa, TwoEvaluationsRegardlessOfDimension) {
  for (std::size_t d : {1u, 5u, 300u}) {
    Counted f{sq_norm};
    spsa_gradient(f, Vec(d, 1.0), 0.1, 3);
    EXPECT_EQ(f.calls, 2u);
  }
}

TEST(Spsa, RejectsNonPositivePerturbation) {
  EXPECT_THROW(spsa_gradient(sq_norm, Vec{1.0}, 0.0, 1), InvalidArgument);
}

TEST(Spsa, NonFiniteProbeIsSignalled) {
  auto f = [](std::span<const double> x) { return x[0] > 0 ? NAN : 0.0; };
  try {
    spsa_gradient(f, Vec{0.0}, 0.5, 1);
    FAIL();
  } catch (const ObjectiveError& e) {
    EXPECT_EQ(e.iteration(), -1);
  }
}

TEST(Spsa, RademacherEntriesAreBalanced) {
  const Vec d = detail::rademacher(100000, 5);
  double sum = 0.0;
  for (double v : d) {
    ASSERT_TRUE(v == 1.0 || v == -1.0);
    sum += v;
  }
  EXPECT_LT(std::abs(sum) / 100000.0, 0.01);
}

TEST(ZoSgd, LinearObjectiveExpectation) {
  const Vec v{1.0, -1.5, 2.0, -1.2};
  auto f = [&](std::span<const double> x) { return std::inner_product(v.begin(), v.end(), x.begin(), 0.0); };
  const Vec theta{0.3, 0.1, -0.2, 0.0};
  Vec mean(4, 0.0);
  const int n = 20000;
  for (int s = 0; s < n; ++s) {
    const auto g = zo_sgd_gradient(f, theta, 0.01, 10, derive_seed(11, s));
    for (int i = 0; i < 4; ++i) mean[i] += g[i] / n;
  }
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(mean[i], v[i], 0.03 * std::abs(v[i]));
}

TEST(ZoSgd, SingleDirectionAlignsWithGradient) {
  Gen g(21);
  int aligned = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 6;
    const Vec diag = g.vec(d, 0.5, 3.0);
    const Vec centre = g.vec(d, -1, 1);
    auto f = [&](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += diag[i] * (x[i] - centre[i]) * (x[i] - centre[i]);
      return s;
    };
    const Vec theta = g.vec(d, -3, 3);
    const auto est = zo_sgd_gradient(f, theta, 1e-6, 1, g.seed());
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += est[i] * 2.0 * diag[i] * (theta[i] - centre[i]);
    aligned += dot > 0.0;
  }
  EXPECT_GE(aligned, 950);
}

TEST(ZoSgd, EvaluationCountIsOnePlusQ) {
  for (std::size_t q : {1u, 4u, 10u}) {
    Counted f{sq_norm};
    zo_sgd_gradient(f, Vec(7, 1.0), 0.01, q, 3);
    EXPECT_EQ(f.calls, 1 + q);
  }
  EXPECT_THROW(zo_sgd_gradient(sq_norm, Vec{1.0}, 0.0, 1, 0), InvalidArgument);
  EXPECT_THROW(zo_sgd_gradient(sq_norm, Vec{1.0}, 0.1, 0, 0), InvalidArgument);
}

TEST(ZoSign, StepFollowsSignOfEstimate) {
  auto f = [](std::span<const double> x) { return 3.0 * x[0] + 2.0 * x[1]; };
  const Vec theta{0.5, -0.25};
  int found = 0;
  for (std::uint64_t s = 0; s < 64; ++s) {
    const auto g = zo_sgd_gradient(f, theta, 0.01, 1, s);
    const auto next = zo_sign_step(f, theta, 0.01, 1, 0.125, s);
    for (int i = 0; i < 2; ++i) EXPECT_EQ(next[i], theta[i] - 0.125 * detail::sign0(g[i]));
    if (g[0] > 0 && g[1] > 0) {
      ++found;
      EXPECT_EQ(next[0], theta[0] - 0.125);
      EXPECT_EQ(next[1], theta[1] - 0.125);
    }
  }
  EXPECT_GT(found, 0);
}

TEST(ZoSign, ZeroEstimateLeavesThetaUnchanged) {
  auto f = [](std::span<const double>) { return 4.0; };
  const Vec theta{1.0, 2.0, 3.0};
  EXPECT_EQ(zo_sign_step(f, theta, 0.1, 5, 0.5, 9), theta);
  EXPECT_EQ(detail::sign0(0.0), 0.0);
  EXPECT_EQ(detail::sign0(-0.0), 0.0);
}

TEST(ZoSign, ReducesL1FromCorner) {
  auto f = [](std::span<const double> x) { return std::abs(x[0]) + std::abs(x[1]); };
  Vec theta{5.0, 5.0};
  for (std::uint64_t k = 0; k < 50; ++k) theta = zo_sign_step(f, theta, 0.01, 4, 0.1, derive_seed(1, k));
  EXPECT_LT(f(theta), 10.0);
  EXPECT_LE(f(theta), 10.0 - 0.1 * 50);  // every step moves both coordinates toward 0
}

TEST(Optimize, ImprovesConvexQuadraticForEveryMethod) {
  for (auto m : {ZoMethod::spsa, ZoMethod::zo_sgd, ZoMethod::zo_sign}) {
    ZoConfig cfg;
    cfg.method = m;
    cfg.iterations = 50;
    cfg.seed = 5;
    const Vec theta0(6, 10.0);
    const auto r = optimize(sq_norm, theta0, cfg);
    EXPECT_LT(r.f_best, sq_norm(theta0)) << to_string(m);
    EXPECT_EQ(r.f_initial, sq_norm(theta0));
    EXPECT_EQ(r.trace.size(), 50u);
    EXPECT_EQ(sq_norm(r.theta_best), r.f_best);
  }
}

TEST(Optimize, SpsaReachesClosedFormMinimum) {
  Gen g(8);
  const Vec centre = g.vec(8, -2, 2);
  const double floor_value = 3.0;
  auto f = [&](std::span<const double> x) {
    double s = floor_value;
    for (std::size_t i = 0; i < 8; ++i) s += (x[i] - centre[i]) * (x[i] - centre[i]);
    return s;
  };
  ZoConfig cfg;
  cfg.iterations = 200;
  // Probe points sit c_k * sqrt(8) away from the iterate, so c bounds how
  // close the best evaluated value can get.
  cfg.spsa.a = 0.3;
  cfg.spsa.c = 0.01;
  cfg.seed = 2;
  const auto r = optimize(f, Vec(8, 0.0), cfg);
  // Closed-form minimizer is the centre with value floor_value.
  EXPECT_NEAR(f(centre), floor_value, 0.0);
  EXPECT_LT(r.f_best - floor_value, 1e-2);
}

TEST(Optimize, BestSoFarIsMonotoneAndConsistent) {
  Gen g(13);
  for (int t = 0; t < 100; ++t) {
    ZoConfig cfg;
    cfg.method = static_cast<ZoMethod>(t % 3);
    cfg.iterations = g.index(1, 40);
    cfg.seed = g.seed();
    cfg.spsa.a = g.uniform(0.0, 1.0);
    cfg.zo.step = g.uniform(0.0, 1.0);
    const std::size_t d = g.index(1, 8);
    auto f = [&](std::span<const double> x) { return std::sin(x[0]) + sq_norm(x); };
    const auto r = optimize(f, g.vec(d, -3, 3), cfg);
    double best = r.f_initial;
    for (double v : r.trace) {
      const double next = std::min(best, v);
      EXPECT_LE(next, best);
      best = next;
    }
    EXPECT_EQ(r.f_best, best);
    EXPECT_LE(r.f_best, r.f_initial);
    EXPECT_EQ(f(r.theta_best), r.f_best);
  }
}

TEST(Optimize, EvaluationCountsAreExact) {
  for (std::size_t T : {1u, 7u, 100u}) {
    ZoConfig cfg;
    cfg.iterations = T;
    Counted f{sq_norm};
    const auto r = optimize(f, Vec(3, 1.0), cfg);
    EXPECT_EQ(f.calls, 2 * T + 1);
    EXPECT_EQ(r.evaluations, 2 * T + 1);
    for (auto m : {ZoMethod::zo_sgd, ZoMethod::zo_sign}) {
      cfg.method = m;
      Counted h{sq_norm};
      optimize(h, Vec(3, 1.0), cfg);
      EXPECT_EQ(h.calls, (1 + cfg.zo.q) * T + 1);
    }
  }
}

TEST(Optimize, DeterministicUnderSeed) {
  for (auto m : {ZoMethod::spsa, ZoMethod::zo_sgd, ZoMethod::zo_sign}) {
    ZoConfig cfg;
    cfg.method = m;
    cfg.iterations = 30;
    cfg.seed = 77;
    const auto a = optimize(sq_norm, Vec{1, 2, 3}, cfg, FixedPointFormat::q16_16());
    const auto b = optimize(sq_norm, Vec{1, 2, 3}, cfg, FixedPointFormat::q16_16());
    EXPECT_EQ(a.theta_best, b.theta_best);
    EXPECT_EQ(a.trace, b.trace);
    const auto c = optimize(sq_norm, Vec{1, 2, 3}, cfg);
    const auto d = optimize(sq_norm, Vec{1, 2, 3}, cfg);
    EXPECT_EQ(c.trace, d.trace);
  }
}

TEST(Optimize, FixedPointKeepsEveryValueRepresentable) {
  const auto fmt = FixedPointFormat{16, 8};
  for (auto m : {ZoMethod::spsa, ZoMethod::zo_sgd, ZoMethod::zo_sign}) {
    std::vector<Vec> seen;
    auto f = [&](std::span<const double> x) {
      seen.emplace_back(x.begin(), x.end());
      return -sq_norm(x);  // pushes toward saturation
    };
    ZoConfig cfg;
    cfg.method = m;
    cfg.iterations = 60;
    cfg.spsa.a = 50.0;
    cfg.zo.step = 20.0;
    const auto r = optimize(f, Vec{120.0, -120.0, 0.3}, cfg, fmt);
    for (const auto& x : seen)
      for (double v : x) {
        EXPECT_GE(v, fmt.min_value());
        EXPECT_LE(v, fmt.max_value());
        EXPECT_EQ(snap(v, fmt), v);
      }
    for (double v : r.trace) EXPECT_EQ(snap(v, fmt), v);
  }
}

TEST(Optimize, FixedModeMatchesFloatWhenValuesAreRepresentable) {
  // T = 1, A = 0: c_0 = c and a_0 = a, so with dyadic inputs every probe,
  // value and update is exactly representable in Q16.16.
  ZoConfig cfg;
  cfg.iterations = 1;
  cfg.spsa = {0.25, 0.0, 0.602, 0.5, 0.101};
  cfg.seed = 3;
  const Vec theta0{1.5, -2.25, 0.75};
  const auto fl = optimize(sq_norm, theta0, cfg);
  const auto fx = optimize(sq_norm, theta0, cfg, FixedPointFormat::q16_16());
  EXPECT_EQ(fl.theta_best, fx.theta_best);
  EXPECT_EQ(fl.f_best, fx.f_best);
  EXPECT_EQ(fl.trace, fx.trace);
}

TEST(Optimize, ObjectiveFailureCarriesIteration) {
  int calls = 0;
  auto f = [&](std::span<const double> x) { return ++calls > 7 ? NAN : sq_norm(x); };
  ZoConfig cfg;
  cfg.iterations = 10;
  try {
    optimize(f, Vec{1.0}, cfg);
    FAIL();
  } catch (const ObjectiveError& e) {
    EXPECT_EQ(e.iteration(), 3);  // calls 1 initial, 2-3 it0, 4-5 it1, 6-7 it2, 8 it3
  }
  auto bad = [](std::span<const double>) { return INFINITY; };
  try {
    optimize(bad, Vec{1.0}, cfg);
    FAIL();
  } catch (const ObjectiveError& e) {
    EXPECT_EQ(e.iteration(), ObjectiveError::initial);
  }
}

TEST(Optimize, ValidatesConfig) {
  ZoConfig cfg;
  cfg.iterations = 0;
  EXPECT_THROW(optimize(sq_norm, Vec{1.0}, cfg), InvalidArgument);
  cfg.iterations = 1;
  cfg.spsa.c = 0.0;
  EXPECT_THROW(optimize(sq_norm, Vec{1.0}, cfg), InvalidArgument);
  EXPECT_EQ(parse_zo_method("zo-sign"), ZoMethod::zo_sign);
  EXPECT_THROW(parse_zo_method("adam"), InvalidArgument);
}

TEST(Optimize, SpsaScheduleFormula) {
  SpsaSchedule s;
  EXPECT_DOUBLE_EQ(s.gain(0), 0.02 / std::pow(11.0, 0.602));
  EXPECT_DOUBLE_EQ(s.perturbation(4), 0.1 / std::pow(5.0, 0.101));
}

TEST(Trace, CsvHasStartRowAndRunningMinimum) {
  ZoResult r;
  r.f_initial = 5.0;
  r.trace = {6.0, 4.0, 4.5};
  std::ostringstream os;
  write_trace_csv(os, r);
  EXPECT_EQ(os.str(), "iteration,objective,best_so_far\n0,5,5\n1,6,5\n2,4,4\n3,4.5,4\n");
}
