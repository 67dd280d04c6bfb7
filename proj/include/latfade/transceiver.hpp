#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "latfade/analysis.hpp"
#include "latfade/channel.hpp"
#include "latfade/lattice.hpp"
#include "latfade/montecarlo.hpp"

namespace latfade {

inline constexpr double kDefaultEpsilon = 0.1;

/// Dithered codeword x = [t - d] mod coarse = t - d + lambda.
struct Codeword {
  Vec t;
  Vec d;
  Vec x;
  Vec lambda;
  std::uint64_t message = 0;
};

inline Codeword encode_with_dither(const NestedPair& pair, std::uint64_t message_index, Vec dither) {
  Codeword c;
  c.message = message_index;
  c.t = pair.codeword(message_index);
  if (dither.size() != c.t.size()) throw std::invalid_argument("encode: dither length != lattice dimension");
  c.d = std::move(dither);
  const Vec diff = c.t - c.d;
  c.lambda = -pair.coarse().nearest_point(diff);
  c.x = diff + c.lambda;
  return c;
}

template <class Gen>
Codeword encode(const NestedPair& pair, std::uint64_t message_index, Gen& rng) {
  if (message_index >= pair.codebook_size()) throw std::out_of_range("encode: message index out of range");
  return encode_with_dither(pair, message_index, sample_dither(pair, rng));
}

/// U^T = P H^T (N0 I + P H H^T)^{-1}, shape tx x rx. With N0 = 1 and P = rho
/// this is rho H^T (I + rho H H^T)^{-1}.
inline Mat mmse_matrix(const Mat& h, double signal_power, double noise_variance = 1.0) {
  if (!(signal_power >= 0.0) || !(noise_variance > 0.0)) throw std::invalid_argument("mmse_matrix: bad powers");
  const Eigen::Index r = h.rows();
  const Mat a = noise_variance * Mat::Identity(r, r) + signal_power * h * h.transpose();
  return signal_power * a.llt().solve(h).transpose();
}

/// Received block in the link's real coordinates: one channel and one
/// observation per channel use.
struct ChannelBlock {
  std::vector<Mat> h;
  std::vector<Vec> y;
};

struct EqualizedBlock {
  Vec y_prime;
  Vec z;
  double sigma_bar_trace = 0.0;
};

/// y' = blockdiag(U_i^T) Y + d and z = y' - t - lambda.
inline EqualizedBlock equalize(const ChannelBlock& rx, const Codeword& cw, double signal_power, double noise_variance,
                               double sigma_bar_trace) {
  if (rx.h.size() != rx.y.size() || rx.h.empty()) throw std::invalid_argument("equalize: empty or ragged block");
  const Eigen::Index tx = rx.h.front().cols();
  if (tx * static_cast<Eigen::Index>(rx.h.size()) != cw.x.size())
    throw std::invalid_argument("equalize: block size does not match codeword length");
  EqualizedBlock out;
  out.y_prime.resize(cw.x.size());
  for (std::size_t i = 0; i < rx.h.size(); ++i) {
    if (rx.h[i].cols() != tx || rx.h[i].rows() != rx.y[i].size())
      throw std::invalid_argument("equalize: channel/observation shape mismatch");
    out.y_prime.segment(static_cast<Eigen::Index>(i) * tx, tx) =
        mmse_matrix(rx.h[i], signal_power, noise_variance) * rx.y[i];
  }
  out.y_prime += cw.d;
  out.z = out.y_prime - cw.t - cw.lambda;
  out.sigma_bar_trace = sigma_bar_trace;
  return out;
}

/// sqrt((1 + eps) tr(Sigma_bar)).
inline double decision_radius(double sigma_bar_trace, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("decision_radius: epsilon must be >= 0");
  if (!(sigma_bar_trace >= 0.0)) throw std::invalid_argument("decision_radius: negative trace");
  return std::sqrt((1.0 + epsilon) * sigma_bar_trace);
}

/// Radius of the decision sphere for a whole block of link.block_len uses.
inline double decision_radius(const LinkConfig& link, const FadingModel& model, double epsilon,
                              std::uint64_t samples = kDefaultMatrixSamples, std::uint64_t seed = 1) {
  return decision_radius(sigma_bar(model, link, samples, seed).block_trace(link.block_len), epsilon);
}

enum class DecodeMethod { AmbiguitySphere, Euclidean };
enum class AmbiguityOutcome { Unique, Ambiguous, Outside };

struct DecodeResult {
  Vec t_hat;  // empty unless a point was decided
  DecodeMethod method = DecodeMethod::Euclidean;
  AmbiguityOutcome ambiguity_outcome = AmbiguityOutcome::Unique;

  bool decided() const { return t_hat.size() > 0; }
};

/// Unique codeword whose fine points fall within `radius` of y', reduced mod
/// the coarse lattice. Several points of the same coset count once.
inline DecodeResult ambiguity_decode(const Vec& y_prime, const NestedPair& pair, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ambiguity_decode: radius must be positive");
  DecodeResult r;
  r.method = DecodeMethod::AmbiguitySphere;
  int found = 0;
  Vec first;
  pair.fine().points_within(y_prime, radius, [&](const Vec& p) {
    if (found == 0) {
      first = p;
      found = 1;
    } else if (!pair.coarse().contains(p - first, 1e-7)) {
      found = 2;
    }
    return found < 2;
  });
  if (found == 0) {
    r.ambiguity_outcome = AmbiguityOutcome::Outside;
  } else if (found > 1) {
    r.ambiguity_outcome = AmbiguityOutcome::Ambiguous;
  } else {
    r.ambiguity_outcome = AmbiguityOutcome::Unique;
    r.t_hat = pair.coarse().mod(first);
  }
  return r;
}

/// [Q_fine(y')] mod coarse.
inline DecodeResult euclidean_decode(const Vec& y_prime, const NestedPair& pair) {
  DecodeResult r;
  r.method = DecodeMethod::Euclidean;
  r.t_hat = pair.coarse().mod(pair.fine().nearest_point(y_prime));
  return r;
}

/// True when t_hat and t are the same coset of the coarse lattice.
inline bool same_codeword(const NestedPair& pair, const Vec& t_hat, const Vec& t) {
  return t_hat.size() == t.size() && pair.coarse().contains(t_hat - t, 1e-7);
}

/// Point-to-point setup shared read-only by all trials.
struct PtpSetup {
  LinkConfig link;
  FadingModel model;
  double radius = 0.0;  // decision sphere radius for the whole block
};

struct PtpTrial {
  bool ok_ambiguity = false;
  bool ok_euclidean = false;
  AmbiguityOutcome outcome = AmbiguityOutcome::Outside;
  double z_norm2 = 0.0;
  double identity_residual = 0.0;  // |y' - (t + lambda + z)|
  bool unique_disagrees = false;    // sphere decoder unique but != Euclidean decision
};

/// Draws the channel and noise for one block and returns the received block.
template <class Gen>
ChannelBlock transmit(const LinkConfig& link, const FadingModel& model, const Vec& x, Gen& rng) {
  const auto tx = static_cast<Eigen::Index>(link.tx_dim());
  if (x.size() != tx * static_cast<Eigen::Index>(link.block_len))
    throw std::invalid_argument("transmit: codeword length != block_len * tx_dim");
  ChannelBlock rx;
  rx.h.reserve(link.block_len);
  rx.y.reserve(link.block_len);
  for (std::size_t i = 0; i < link.block_len; ++i) {
    Mat h = sample_link_channel(model, link, rng);
    Vec w = sample_noise(link.rx_dim(), rng, link.noise_variance());
    rx.y.push_back(h * x.segment(static_cast<Eigen::Index>(i) * tx, tx) + w);
    rx.h.push_back(std::move(h));
  }
  return rx;
}

/// One encode -> channel -> equalize -> decode cycle; both decoders see the
/// same realization.
template <class Gen>
PtpTrial run_ptp_trial(const PtpSetup& setup, const NestedPair& pair, Gen& rng) {
  if (pair.dimension() != setup.link.lattice_dim())
    throw std::invalid_argument("run_ptp_trial: lattice dimension != link lattice dimension");
  std::uniform_int_distribution<std::uint64_t> msg(0, pair.codebook_size() - 1);
  const Codeword cw = encode(pair, msg(rng), rng);
  const ChannelBlock rx = transmit(setup.link, setup.model, cw.x, rng);
  const EqualizedBlock eq =
      equalize(rx, cw, setup.link.signal_power(), setup.link.noise_variance(), setup.radius * setup.radius);
  PtpTrial out;
  out.z_norm2 = eq.z.squaredNorm();
  out.identity_residual = (eq.y_prime - (cw.t + cw.lambda + eq.z)).norm();
  const DecodeResult amb = ambiguity_decode(eq.y_prime, pair, setup.radius);
  const DecodeResult euc = euclidean_decode(eq.y_prime, pair);
  out.outcome = amb.ambiguity_outcome;
  out.ok_ambiguity = amb.decided() && same_codeword(pair, amb.t_hat, cw.t);
  out.ok_euclidean = same_codeword(pair, euc.t_hat, cw.t);
  // A unique sphere point is necessarily the Euclidean nearest point.
  out.unique_disagrees = amb.decided() && !same_codeword(pair, amb.t_hat, euc.t_hat);
  return out;
}

struct PtpBatch {
  std::size_t n = 0;  // lattice dimension
  double rho = 0.0;
  double rate = 0.0;  // bits per real dimension
  std::uint64_t trials = 0;
  std::uint64_t err_ambiguity = 0;
  std::uint64_t err_euclidean = 0;
  std::uint64_t ambiguous_count = 0;
  std::uint64_t outside_count = 0;
  double mean_z_norm2 = 0.0;
  std::uint64_t dominance_violations = 0;  // Euclidean wrong while the sphere decoder was right
  std::uint64_t unique_disagreements = 0;
  double max_identity_residual = 0.0;
};

/// Independent trials, one stream per trial index.
inline PtpBatch run_ptp_batch(const PtpSetup& setup, const NestedPair& pair, std::uint64_t trials, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("run_ptp_batch: trials must be >= 1");
  std::vector<PtpTrial> rec(trials);
  parallel_for(trials, [&](std::uint64_t i) {
    Rng rng = make_stream(seed, i);
    rec[i] = run_ptp_trial(setup, pair, rng);
  });
  PtpBatch b;
  b.n = pair.dimension();
  b.rho = setup.link.rho;
  b.rate = pair.rate_bits_per_dim();
  b.trials = trials;
  double z_acc = 0.0;
  for (const auto& r : rec) {
    b.err_ambiguity += r.ok_ambiguity ? 0 : 1;
    b.err_euclidean += r.ok_euclidean ? 0 : 1;
    b.ambiguous_count += r.outcome == AmbiguityOutcome::Ambiguous ? 1 : 0;
    b.outside_count += r.outcome == AmbiguityOutcome::Outside ? 1 : 0;
    b.dominance_violations += (r.ok_ambiguity && !r.ok_euclidean) ? 1 : 0;
    b.unique_disagreements += r.unique_disagrees ? 1 : 0;
    b.max_identity_residual = std::max(b.max_identity_residual, r.identity_residual);
    z_acc += r.z_norm2;
  }
  b.mean_z_norm2 = z_acc / static_cast<double>(trials);
  return b;
}

struct ConcentrationPoint {
  std::size_t block_len = 0;
  std::uint64_t trials = 0;
  std::uint64_t exceed = 0;
  double threshold = 0.0;  // (1 + eps) tr(Sigma_bar) for the block
  double fraction() const { return trials ? static_cast<double>(exceed) / static_cast<double>(trials) : 0.0; }
  /// Normal-approximation 95% half-width of the exceedance fraction.
  double ci95() const {
    const double f = fraction();
    return trials ? 1.96 * std::sqrt(std::max(f * (1.0 - f), 1.0 / static_cast<double>(trials)) /
                                     static_cast<double>(trials))
                  : 0.0;
  }
};

/// Fraction of blocks whose equivalent noise leaves the decision sphere,
/// ||z||^2 > (1 + eps) tr(Sigma_bar), for each block length. Uses a
/// single-codeword cubic pair, so no decoding is involved.
inline std::vector<ConcentrationPoint> noise_concentration_report(const FadingModel& model, LinkConfig link,
                                                                  double epsilon,
                                                                  const std::vector<std::size_t>& block_lens,
                                                                  std::uint64_t trials, std::uint64_t seed,
                                                                  std::uint64_t sigma_samples = kDefaultMatrixSamples) {
  if (trials == 0) throw std::invalid_argument("noise_concentration_report: trials must be >= 1");
  const SigmaBar sb = sigma_bar(model, link, sigma_samples, derive_seed(seed, 0));
  std::vector<ConcentrationPoint> out;
  for (std::size_t n : block_lens) {
    link.block_len = n;
    link.validate();
    const NestedPair pair = cubic_pair(link.lattice_dim(), 1, link.signal_power());
    ConcentrationPoint pt;
    pt.block_len = n;
    pt.trials = trials;
    pt.threshold = (1.0 + epsilon) * sb.block_trace(n);
    PtpSetup setup{link, model, std::sqrt(pt.threshold)};
    std::vector<char> hit(trials, 0);
    const std::uint64_t stage_seed = derive_seed(seed, n);
    parallel_for(trials, [&](std::uint64_t i) {
      Rng rng = make_stream(stage_seed, i);
      const Codeword cw = encode(pair, 0, rng);
      const ChannelBlock rx = transmit(link, model, cw.x, rng);
      const EqualizedBlock eq = equalize(rx, cw, link.signal_power(), link.noise_variance(), pt.threshold);
      hit[i] = eq.z.squaredNorm() > pt.threshold ? 1 : 0;
    });
    for (char h : hit) pt.exceed += static_cast<std::uint64_t>(h);
    out.push_back(pt);
  }
  return out;
}

}  // namespace latfade
