#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "latfade/montecarlo.hpp"
#include "latfade/random.hpp"

using namespace latfade;

TEST(McEstimate, HalfWidthIsTwoSigma) {
  const McEstimate e = McEstimate::make(1.0, 0.5, 100);
  EXPECT_DOUBLE_EQ(e.ci95_halfwidth, 1.96 * 0.5);
  const McEstimate x = McEstimate::exact(3.0);
  EXPECT_EQ(x.std_error, 0.0);
  EXPECT_EQ(x.ci95_halfwidth, 0.0);
}

TEST(Moments, MatchesTwoPassStatistics) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> xs;
  Moments m(2);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v{g(rng), 0.0};
    v[1] = 2.0 * v[0] + g(rng);
    m.add(v);
    xs.push_back(v);
  }
  double m0 = 0, m1 = 0;
  for (auto& v : xs) m0 += v[0], m1 += v[1];
  m0 /= 1000, m1 /= 1000;
  double c01 = 0, c00 = 0;
  for (auto& v : xs) c01 += (v[0] - m0) * (v[1] - m1), c00 += (v[0] - m0) * (v[0] - m0);
  EXPECT_NEAR(m.mean(0), m0, 1e-12);
  EXPECT_NEAR(m.mean(1), m1, 1e-12);
  EXPECT_NEAR(m.covariance()(0, 1), c01 / 999, 1e-10);
  EXPECT_NEAR(m.estimate(0).std_error, std::sqrt(c00 / 999 / 1000), 1e-12);
}

TEST(Moments, MergeEqualsSequential) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u;
  Moments all(3), a(3), b(3);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v{u(rng), u(rng), u(rng)};
    all.add(v);
    (i < 200 ? a : b).add(v);
  }
  a.merge(b);
  EXPECT_EQ(a.count(), all.count());
  EXPECT_LT((a.mean() - all.mean()).norm(), 1e-12);
  EXPECT_LT((a.covariance() - all.covariance()).norm(), 1e-12);
}

TEST(Moments, DeltaMethodForRatio) {
  // g(a, b) = a / b with independent coordinates: var ~ var(a)/b^2 + a^2 var(b)/b^4
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Moments m(2);
  for (int i = 0; i < 20000; ++i) {
    std::vector<double> v{1.0 + 0.1 * g(rng), 2.0 + 0.2 * g(rng)};
    m.add(v);
  }
  const double a = m.mean(0), b = m.mean(1);
  const McEstimate r = m.delta(a / b, Eigen::Vector2d(1.0 / b, -a / (b * b)));
  const double expected = std::sqrt((0.01 / 4.0 + 0.04 / 16.0) / 20000.0);
  EXPECT_NEAR(r.std_error, expected, 0.05 * expected);
}

TEST(RunMoments, BitIdenticalAcrossWorkerCounts) {
  auto sampler = [](Rng& rng, std::span<double> out) {
    std::exponential_distribution<double> e(1.0);
    const double x = e(rng);
    out[0] = std::log2(1.0 + x);
    out[1] = 1.0 / (1.0 + x);
  };
  const Moments one = run_moments(2, 20000, 42, sampler, 1);
  const Moments three = run_moments(2, 20000, 42, sampler, 3);
  EXPECT_EQ(one.mean(0), three.mean(0));
  EXPECT_EQ(one.mean(1), three.mean(1));
  EXPECT_EQ(one.covariance()(0, 1), three.covariance()(0, 1));
  const Moments other = run_moments(2, 20000, 43, sampler, 1);
  EXPECT_NE(one.mean(0), other.mean(0));
}

TEST(RunMoments, RejectsZeroSamples) {
  EXPECT_THROW(run_moments(1, 0, 1, [](Rng&, std::span<double> o) { o[0] = 0; }), std::invalid_argument);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(
                   100, [](std::uint64_t i) {
                     if (i == 37) throw std::runtime_error("boom");
                   },
                   4),
               std::runtime_error);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, [&](std::uint64_t i) { ++hits[i]; }, 4);
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Streams, SameSeedSameSequenceDifferentStreamsDiffer) {
  Rng a = make_stream(7, 0), b = make_stream(7, 0), c = make_stream(7, 1);
  const auto va = a(), vb = b(), vc = c();
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
  EXPECT_NE(derive_seed(7, 0), derive_seed(7, 1));
}
