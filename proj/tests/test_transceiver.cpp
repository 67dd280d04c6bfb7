#include <gtest/gtest.h>

#include <cmath>

#include "latfade/transceiver.hpp"
#include "oracles.hpp"

using namespace latfade;

namespace {

const FadingModel kRay = FadingModel::rayleigh();

FadingModel identity_model(std::size_t n = 1) { return FadingModel::fixed(CMat::Identity(n, n)); }

}  // namespace

TEST(Encode, DegenerateDitherGivesZero) {
  const NestedPair pair = cubic_pair(4, 3, 1.0);
  const Codeword c = encode_with_dither(pair, 0, Vec::Zero(4));
  EXPECT_EQ(c.x, Vec::Zero(4));
  EXPECT_EQ(c.lambda, Vec::Zero(4));
  EXPECT_THROW(encode_with_dither(pair, 0, Vec::Zero(3)), std::invalid_argument);
  Rng rng = make_stream(1, 0);
  EXPECT_THROW(encode(pair, pair.codebook_size(), rng), std::out_of_range);
}

TEST(Encode, PowerAndIdentity) {
  const double rho = 3.0;
  const NestedPair pair = construction_a_pair(8, 2, 5, rho, 4);
  Rng rng = make_stream(2, 0);
  std::uniform_int_distribution<std::uint64_t> msg(0, pair.codebook_size() - 1);
  Moments m(1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Codeword c = encode(pair, msg(rng), rng);
    worst = std::max(worst, (c.x - (c.t - c.d + c.lambda)).norm());
    EXPECT_TRUE(pair.coarse().contains(c.lambda));
    EXPECT_LT((pair.coarse().mod(c.x) - c.x).norm(), 1e-12);
    const double p = c.x.squaredNorm() / 8.0;
    m.add(std::span<const double>(&p, 1));
  }
  EXPECT_LE(worst, 1e-12);
  EXPECT_NEAR(m.mean(0), rho, 3.0 * m.estimate(0).std_error);
}

TEST(Mmse, Examples) {
  Mat one(1, 1);
  one << 1.0;
  EXPECT_NEAR(mmse_matrix(one, 1.0)(0, 0), 0.5, 1e-15);
  EXPECT_TRUE(mmse_matrix(Mat::Identity(2, 2), 1.0).isApprox(0.5 * Mat::Identity(2, 2)));
}

TEST(Mmse, EquivalentNoiseMatchesInversionLemmaForm) {
  Rng rng = make_stream(3, 0);
  for (int t = 0; t < 200; ++t) {
    const double rho = 0.1 + 10.0 * (t % 7);
    const std::size_t nr = 1 + t % 3, nt = 1 + (t / 3) % 3;
    const Mat h = sample_real_channel(kRay, nr, nt, rng);
    const Vec x = sample_noise(nt, rng), w = sample_noise(nr, rng);
    const Mat u = mmse_matrix(h, rho);
    const Vec direct = u * (h * x + w) - x;
    const Mat a = Mat::Identity(nt, nt) + rho * h.transpose() * h;
    const Mat b = Mat::Identity(nr, nr) + rho * h * h.transpose();
    const Vec lemma = -a.inverse() * x + rho * h.transpose() * b.inverse() * w;
    EXPECT_LT((direct - lemma).norm(), 1e-9);
  }
}

TEST(Mmse, MinimizesEquivalentNoisePower) {
  // E||z||^2 = tr((U^T H - I)(U^T H - I)^T) rho + tr(U^T U) for unit-power x, w
  Rng rng = make_stream(4, 0);
  const double rho = 2.0;
  const Mat h = sample_real_channel(kRay, 3, 2, rng);
  auto mse = [&](const Mat& ut) {
    const Mat e = ut * h - Mat::Identity(2, 2);
    return rho * (e * e.transpose()).trace() + (ut * ut.transpose()).trace();
  };
  const Mat u = mmse_matrix(h, rho);
  const double best = mse(u);
  for (int t = 0; t < 50; ++t) {
    Mat pert(2, 3);
    for (int i = 0; i < 6; ++i) pert(i) = sample_noise(1, rng)(0) * 0.05;
    EXPECT_GE(mse(u + pert), best);
  }
}

TEST(Equalize, HighSnrIsTransparent) {
  const NestedPair pair = cubic_pair(6, 4, 1e8);
  Rng rng = make_stream(5, 0);
  const Codeword cw = encode(pair, 17, rng);
  ChannelBlock rx;
  for (int i = 0; i < 6; ++i) {
    rx.h.push_back(Mat::Identity(1, 1));
    rx.y.push_back(cw.x.segment(i, 1));
  }
  const EqualizedBlock eq = equalize(rx, cw, 1e8, 1.0, 0.0);
  EXPECT_LT(eq.z.norm() / std::sqrt(6.0), 1e-3);
  EXPECT_LT((eq.y_prime - cw.t - cw.lambda).norm(), 1e-3);
  rx.y.pop_back();
  EXPECT_THROW(equalize(rx, cw, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(Equalize, ScalarUnitChannelNoiseVariance) {
  // z = -x/2 + w/2 with Var = rho/(1 + rho) = 0.5
  const LinkConfig link{1, 1, 1.0, 1, SignalMode::Real};
  const FadingModel model = identity_model();
  const NestedPair pair = cubic_pair(1, 1, 1.0);
  Rng rng = make_stream(6, 0);
  Moments m(1);
  for (int i = 0; i < 100000; ++i) {
    const Codeword cw = encode(pair, 0, rng);
    const ChannelBlock rx = transmit(link, model, cw.x, rng);
    const EqualizedBlock eq = equalize(rx, cw, 1.0, 1.0, 0.5);
    const double w = rx.y[0](0) - cw.x(0);
    ASSERT_NEAR(eq.z(0), -cw.x(0) / 2 + w / 2, 1e-12);
    const double z2 = eq.z(0) * eq.z(0);
    m.add(std::span<const double>(&z2, 1));
  }
  EXPECT_NEAR(m.mean(0), 0.5, 3.0 * m.estimate(0).std_error);
}

TEST(DecisionRadius, Examples) {
  LinkConfig link{1, 1, 1.0, 100, SignalMode::Complex};
  EXPECT_NEAR(decision_radius(link, identity_model(), 0.0), std::sqrt(50.0), 1e-12);
  const double r0 = decision_radius(link, identity_model(), 0.0);
  const double r1 = decision_radius(link, identity_model(), 0.1);
  EXPECT_NEAR(r1 * r1, 1.1 * r0 * r0, 1e-12);

  link.block_len = 1;
  const SigmaBar sb = sigma_bar(kRay, link, 200000, 7);
  const double r = decision_radius(link, kRay, 0.0, 200000, 7);
  const double ref = oracle::rayleigh_expect([](double x) { return 1.0 / (1.0 + x); });
  EXPECT_NEAR(r * r, ref, 4.0 * sb.trace_std_error);
  EXPECT_NEAR(ref, 0.59635, 5e-6);
  EXPECT_THROW(decision_radius(1.0, -0.1), std::invalid_argument);
}

TEST(AmbiguityDecode, Outcomes) {
  const NestedPair pair(Lattice::scaled(2, 4.0), Lattice::integer(2));
  Vec on(2), mid(2), far(2);
  on << 1, 0;
  mid << 0.5, 0;
  far << 0.5, 0.5;
  const DecodeResult u = ambiguity_decode(on, pair, 0.4);
  EXPECT_EQ(u.ambiguity_outcome, AmbiguityOutcome::Unique);
  ASSERT_TRUE(u.decided());
  EXPECT_TRUE(same_codeword(pair, u.t_hat, on));
  const DecodeResult a = ambiguity_decode(mid, pair, 0.6);
  EXPECT_EQ(a.ambiguity_outcome, AmbiguityOutcome::Ambiguous);
  EXPECT_FALSE(a.decided());
  // two points of one coset inside the sphere still decode uniquely
  const NestedPair zero(Lattice::integer(2), Lattice::integer(2));
  const DecodeResult same = ambiguity_decode(mid, zero, 0.6);
  EXPECT_EQ(same.ambiguity_outcome, AmbiguityOutcome::Unique);
  const DecodeResult o = ambiguity_decode(far, pair, 0.1);
  EXPECT_EQ(o.ambiguity_outcome, AmbiguityOutcome::Outside);
  EXPECT_FALSE(o.decided());
  EXPECT_THROW(ambiguity_decode(on, pair, 0.0), std::invalid_argument);
}

TEST(EuclideanDecode, NoiselessRecoversMessage) {
  const NestedPair pair = construction_a_pair(8, 2, 5, 1.0, 3);
  Rng rng = make_stream(8, 0);
  for (std::uint64_t m = 0; m < pair.codebook_size(); ++m) {
    const Codeword cw = encode(pair, m, rng);
    const DecodeResult r = euclidean_decode(cw.t + cw.lambda, pair);
    EXPECT_TRUE(same_codeword(pair, r.t_hat, cw.t));
    EXPECT_LT((r.t_hat - cw.t).norm(), 1e-9);
  }
}

TEST(PtpTrial, HighSnrIdentityChannelDecodesCorrectly) {
  const LinkConfig link{1, 1, 1e6, 4, SignalMode::Real};
  const NestedPair pair = cubic_pair(4, 2, link.signal_power());
  EXPECT_NEAR(pair.rate_bits_per_dim(), 1.0, 1e-12);
  // sphere wide against the noise, tiny against the fine spacing
  const PtpSetup setup{link, identity_model(), decision_radius(link, identity_model(), 10.0)};
  const PtpBatch b = run_ptp_batch(setup, pair, 200, 9);
  EXPECT_EQ(b.err_ambiguity, 0u);
  EXPECT_EQ(b.err_euclidean, 0u);
}

TEST(PtpTrial, ZeroRatePairAlwaysCorrect) {
  const LinkConfig link{1, 1, 0.5, 4, SignalMode::Complex};
  const NestedPair pair = cubic_pair(8, 1, link.signal_power());
  // at the covering radius the sphere always holds a point of the only coset
  const PtpSetup setup{link, kRay, pair.fine().covering_radius_bound()};
  const PtpBatch b = run_ptp_batch(setup, pair, 500, 10);
  EXPECT_EQ(b.err_ambiguity, 0u);
  EXPECT_EQ(b.err_euclidean, 0u);
}

TEST(PtpTrial, ErrorRateFallsWithSnrAndEuclideanDominates) {
  std::uint64_t prev = 0;
  bool first = true;
  for (double rho : {1.0, 4.0}) {
    const LinkConfig link{1, 1, rho, 4, SignalMode::Complex};
    const NestedPair pair = construction_a_pair(8, 1, 5, link.signal_power(), 11);
    EXPECT_NEAR(pair.rate_bits_per_dim(), 0.2902, 1e-4);
    const PtpSetup setup{link, kRay, decision_radius(link, kRay, kDefaultEpsilon, 100000, 12)};
    const PtpBatch b = run_ptp_batch(setup, pair, 10000, 13);
    EXPECT_LE(b.err_euclidean, b.err_ambiguity);
    EXPECT_EQ(b.dominance_violations, 0u);
    EXPECT_EQ(b.unique_disagreements, 0u);
    EXPECT_LE(b.max_identity_residual, 1e-9);
    if (!first) {
      EXPECT_LT(b.err_euclidean, prev);
    }
    prev = b.err_euclidean;
    first = false;
  }
}

TEST(PtpTrial, BatchIsDeterministic) {
  const LinkConfig link{1, 1, 2.0, 4, SignalMode::Complex};
  const NestedPair pair = construction_a_pair(8, 1, 5, link.signal_power(), 11);
  const PtpSetup setup{link, kRay, decision_radius(link, kRay, 0.1, 20000, 1)};
  const PtpBatch a = run_ptp_batch(setup, pair, 500, 14);
  const PtpBatch b = run_ptp_batch(setup, pair, 500, 14);
  EXPECT_EQ(a.err_ambiguity, b.err_ambiguity);
  EXPECT_EQ(a.err_euclidean, b.err_euclidean);
  EXPECT_EQ(a.mean_z_norm2, b.mean_z_norm2);
  EXPECT_THROW(run_ptp_batch(setup, cubic_pair(6, 2, 1.0), 10, 1), std::invalid_argument);
}

TEST(Concentration, IdentityChannelBelowFivePercent) {
  const LinkConfig link{1, 1, 1.0, 1, SignalMode::Complex};
  const auto pts = noise_concentration_report(identity_model(), link, 0.1, {1024}, 1000, 15);
  EXPECT_LT(pts[0].fraction(), 0.05);
  const auto wide = noise_concentration_report(identity_model(), link, 100.0, {16}, 1000, 16);
  EXPECT_EQ(wide[0].exceed, 0u);
}

TEST(Concentration, RayleighExceedanceShrinksWithBlockLength) {
  const LinkConfig link{1, 1, 1.0, 1, SignalMode::Complex};
  const auto pts = noise_concentration_report(kRay, link, 0.1, {64, 1024}, 1000, 17, 200000);
  EXPECT_LE(pts[1].fraction(), pts[0].fraction() + pts[0].ci95());
  EXPECT_LT(pts[1].fraction(), pts[0].fraction());
}
