#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "latfade/channel.hpp"
#include "latfade/montecarlo.hpp"

namespace latfade {

inline constexpr double kLog2e = std::numbers::log2e;

inline constexpr std::uint64_t kDefaultScalarSamples = 1'000'000;
inline constexpr std::uint64_t kDefaultMatrixSamples = 100'000;

/// One gap bound with its applicability predicate already evaluated.
/// Inapplicable bounds are reported but never asserted.
struct Bound {
  std::string name;
  double value = std::numeric_limits<double>::quiet_NaN();
  bool applicable = false;
  std::string condition;
};

struct GapReport {
  McEstimate capacity;
  McEstimate rate;
  McEstimate gap;  // capacity - rate, CI from the joint samples
  std::vector<Bound> applicable_bounds;

  /// Bounds that are applicable and fall below gap - ci95 (soundness failures).
  std::vector<Bound> violated_bounds() const {
    std::vector<Bound> out;
    for (const auto& b : applicable_bounds)
      if (b.applicable && !(b.value >= gap.mean - gap.ci95_halfwidth)) out.push_back(b);
    return out;
  }
};

namespace detail {

inline Eigen::Index tri_size(Eigen::Index d) { return d * (d + 1) / 2; }

// Writes the upper triangle of a symmetric matrix, row-major.
inline void pack_upper(const Eigen::MatrixXd& a, std::span<double> out) {
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i; j < a.cols(); ++j) out[k++] = a(i, j);
}

inline Eigen::MatrixXd unpack_upper(const Eigen::VectorXd& v, Eigen::Index d, Eigen::Index offset = 0) {
  Eigen::MatrixXd a(d, d);
  Eigen::Index k = offset;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) a(i, j) = a(j, i) = v(k++);
  return a;
}

// Gradient of ln det M with respect to the packed upper triangle of M.
inline Eigen::VectorXd logdet_gradient(const Eigen::MatrixXd& m_inv) {
  const Eigen::Index d = m_inv.rows();
  Eigen::VectorXd g(tri_size(d));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) g(k++) = (i == j) ? m_inv(i, i) : 2.0 * m_inv(i, j);
  return g;
}

inline double log2_det_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) + ": matrix not positive definite (insufficient samples?)");
  const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 1e-150)) throw std::runtime_error(std::string(what) + ": near-singular mean matrix");
    acc += 2.0 * std::log2(diag(i));
  }
  return acc;
}

}  // namespace detail

/// Rate and capacity of the point-to-point link, from one set of draws.
///
/// Rate is -(1/2) log2 det(E[(I + rho H^T H)^{-1}]) over the link's real
/// coordinates (realified in complex mode, where it equals the complex
/// -log2 det); capacity is (1/2) E[log2 det(I + rho H^T H)]. Both are in bits
/// per channel use. The expectation of the inverse is the mean of per-draw
/// inverses, taken before the log-det.
inline GapReport mimo_gap_report(const FadingModel& model, std::size_t n_t, std::size_t n_r, double rho,
                                 std::uint64_t samples = kDefaultMatrixSamples, std::uint64_t seed = 1,
                                 SignalMode mode = SignalMode::Complex) {
  LinkConfig link{n_t, n_r, rho, 1, mode};
  link.validate();
  const auto d = static_cast<Eigen::Index>(link.tx_dim());
  const Eigen::Index tri = detail::tri_size(d);
  const double snr = link.signal_power() / link.noise_variance();
  const Moments mom = run_moments(static_cast<std::size_t>(tri + 1), samples, seed, [&](Rng& rng, std::span<double> out) {
    const Eigen::MatrixXd h = sample_link_channel(model, link, rng);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) + snr * h.transpose() * h;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
    detail::pack_upper(inv, out.first(static_cast<std::size_t>(tri)));
    const Eigen::MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) logdet += 2.0 * std::log2(l(i, i));
    out[static_cast<std::size_t>(tri)] = 0.5 * logdet;
  });
  const Eigen::MatrixXd mean_inv = detail::unpack_upper(mom.mean(), d);
  const double rate = -0.5 * detail::log2_det_spd(mean_inv, "achievable_rate_mimo");
  const Eigen::MatrixXd m_inv = mean_inv.inverse();
  Eigen::VectorXd grad_rate = Eigen::VectorXd::Zero(tri + 1);
  grad_rate.head(tri) = -0.5 * kLog2e * detail::logdet_gradient(m_inv);
  Eigen::VectorXd grad_gap = -grad_rate;
  grad_gap(tri) = 1.0;

  GapReport r;
  r.capacity = mom.estimate(static_cast<std::size_t>(tri));
  r.rate = mom.delta(rate, grad_rate);
  r.gap = mom.delta(r.capacity.mean - rate, grad_gap);
  return r;
}

/// Achievable lattice rate -log2 det(E[(I + rho H^H H)^{-1}]) (complex mode),
/// or the real-channel form with the 1/2 factor.
inline McEstimate achievable_rate_mimo(const FadingModel& model, std::size_t n_t, std::size_t n_r, double rho,
                                       std::uint64_t samples = kDefaultMatrixSamples, std::uint64_t seed = 1,
                                       SignalMode mode = SignalMode::Complex) {
  return mimo_gap_report(model, n_t, n_r, rho, samples, seed, mode).rate;
}

/// Ergodic capacity E[log2 det(I + rho H^H H)].
inline McEstimate ergodic_capacity(const FadingModel& model, std::size_t n_t, std::size_t n_r, double rho,
                                   std::uint64_t samples = kDefaultMatrixSamples, std::uint64_t seed = 1,
                                   SignalMode mode = SignalMode::Complex) {
  return mimo_gap_report(model, n_t, n_r, rho, samples, seed, mode).capacity;
}

/// Per-channel-use decision covariance Sigma_bar = P E[(I + (P/N0) H^T H)^{-1}]
/// in the link's real coordinates.
struct SigmaBar {
  Eigen::MatrixXd per_use;
  double trace_per_use = 0.0;
  double trace_std_error = 0.0;

  /// tr(Sigma_bar) over a whole block of `block_len` channel uses.
  double block_trace(std::size_t block_len) const { return trace_per_use * static_cast<double>(block_len); }
};

inline SigmaBar sigma_bar(const FadingModel& model, const LinkConfig& link,
                          std::uint64_t samples = kDefaultMatrixSamples, std::uint64_t seed = 1) {
  link.validate();
  const auto d = static_cast<Eigen::Index>(link.tx_dim());
  const double p = link.signal_power();
  const double snr = p / link.noise_variance();
  SigmaBar out;
  if (model.kind == FadingKind::Deterministic) {
    Rng rng = make_stream(seed, 0);
    const Eigen::MatrixXd h = sample_link_channel(model, link, rng);
    out.per_use = p * (Eigen::MatrixXd::Identity(d, d) + snr * h.transpose() * h).inverse();
    out.trace_per_use = out.per_use.trace();
    return out;
  }
  const Eigen::Index tri = detail::tri_size(d);
  const Moments mom = run_moments(static_cast<std::size_t>(tri + 1), samples, seed, [&](Rng& rng, std::span<double> o) {
    const Eigen::MatrixXd h = sample_link_channel(model, link, rng);
    const Eigen::MatrixXd inv =
        (Eigen::MatrixXd::Identity(d, d) + snr * h.transpose() * h).llt().solve(Eigen::MatrixXd::Identity(d, d));
    detail::pack_upper(inv, o.first(static_cast<std::size_t>(tri)));
    o[static_cast<std::size_t>(tri)] = p * inv.trace();
  });
  out.per_use = p * detail::unpack_upper(mom.mean(), d);
  const McEstimate tr = mom.estimate(static_cast<std::size_t>(tri));
  out.trace_per_use = tr.mean;
  out.trace_std_error = tr.std_error;
  return out;
}

/// First and second moments of the channel used by the gap bounds. Optional
/// fields are absent when the moment is infinite or unknown.
struct ChannelMoments {
  std::optional<CMat> gram_mean;      // E[H^H H]
  std::optional<CMat> inv_gram_mean;  // E[(H^H H)^{-1}]
  double norm2_mean = 0.0;            // E||h||^2 (first column)
  std::optional<double> norm4_mean;   // E||h||^4 (first column)
  std::optional<double> inv_gain2_mean;  // E[1/|h|^2], single antenna
  bool iid_complex_gaussian = false;
};

/// Analytic moments for the supported models.
inline ChannelMoments channel_moments(const FadingModel& model, std::size_t n_t, std::size_t n_r) {
  ChannelMoments mo;
  const auto nt = static_cast<Eigen::Index>(n_t);
  const double nr = static_cast<double>(n_r);
  switch (model.kind) {
    case FadingKind::RayleighIID:
      mo.iid_complex_gaussian = true;
      mo.gram_mean = CMat::Identity(nt, nt) * nr;
      if (n_r > n_t) mo.inv_gram_mean = CMat::Identity(nt, nt) / (nr - static_cast<double>(n_t));
      mo.norm2_mean = nr;
      mo.norm4_mean = nr * (nr + 1.0);
      break;
    case FadingKind::Nakagami: {
      mo.gram_mean = CMat::Identity(nt, nt) * nr;
      mo.norm2_mean = nr;
      const double e4 = 1.0 + 1.0 / model.m;
      mo.norm4_mean = nr * e4 + nr * (nr - 1.0);
      if (n_t == 1 && n_r == 1 && model.m > 1.0) {
        mo.inv_gain2_mean = model.m / (model.m - 1.0);
        mo.inv_gram_mean = CMat::Identity(1, 1) * *mo.inv_gain2_mean;
      }
      break;
    }
    case FadingKind::Deterministic: {
      const CMat& h = model.matrix;
      if (h.rows() != static_cast<Eigen::Index>(n_r) || h.cols() != nt)
        throw std::invalid_argument("channel_moments: fixed matrix has the wrong shape");
      const CMat g = h.adjoint() * h;
      mo.gram_mean = g;
      Eigen::FullPivLU<CMat> lu(g);
      if (lu.isInvertible()) mo.inv_gram_mean = lu.inverse();
      const double n2 = h.col(0).squaredNorm();
      mo.norm2_mean = n2;
      mo.norm4_mean = n2 * n2;
      if (n_t == 1 && n_r == 1 && n2 > 0.0) mo.inv_gain2_mean = 1.0 / n2;
      break;
    }
  }
  return mo;
}

/// N_t log2(1 + (N_t + 1)/(N_r - N_t)); refuses N_r <= N_t where the inverse
/// Wishart mean diverges.
inline double cor1_wishart_bound(std::size_t n_t, std::size_t n_r) {
  if (n_r <= n_t) throw std::domain_error("wishart gap bound: needs N_r > N_t");
  const double nt = static_cast<double>(n_t);
  return nt * std::log2(1.0 + (nt + 1.0) / static_cast<double>(n_r - n_t));
}

/// Gap bounds for the N_t x N_r link:
///   (a) log2 det((I + E[H^H H]) E[(H^H H)^{-1}])   N_r >= N_t, rho >= 1, finite inverse mean
///   (b) N_t log2(1 + (N_t+1)/(N_r-N_t))           N_r > N_t, rho >= 1, i.i.d. complex Gaussian
///   (c) 1.45 E||h||^4 rho^2                         N_t = 1, rho < 1/E||h||^2
inline std::vector<Bound> gap_bounds_cor1(const ChannelMoments& mo, std::size_t n_t, std::size_t n_r, double rho) {
  std::vector<Bound> out;
  {
    Bound b{"mimo_inverse_gram", std::numeric_limits<double>::quiet_NaN(), false, "N_r>=N_t, rho>=1, E[(H^H H)^-1] finite"};
    if (mo.gram_mean && mo.inv_gram_mean) {
      const auto nt = static_cast<Eigen::Index>(n_t);
      const CMat prod = (CMat::Identity(nt, nt) + *mo.gram_mean) * *mo.inv_gram_mean;
      b.value = std::log2(std::abs(prod.determinant()));
      b.applicable = n_r >= n_t && rho >= 1.0;
    }
    out.push_back(b);
  }
  {
    Bound b{"mimo_iid_rayleigh", std::numeric_limits<double>::quiet_NaN(), false, "N_r>N_t, rho>=1, i.i.d. Rayleigh"};
    if (n_r > n_t) {
      b.value = cor1_wishart_bound(n_t, n_r);
      b.applicable = mo.iid_complex_gaussian && rho >= 1.0;
    }
    out.push_back(b);
  }
  {
    Bound b{"simo_low_snr", std::numeric_limits<double>::quiet_NaN(), false, "N_t=1, rho<1/E||h||^2"};
    if (n_t == 1 && mo.norm4_mean) {
      b.value = 1.45 * *mo.norm4_mean * rho * rho;
      b.applicable = mo.norm2_mean > 0.0 && rho < 1.0 / mo.norm2_mean;
    }
    out.push_back(b);
  }
  return out;
}

/// Single-antenna gap bounds:
///   low:  1.45 E|h|^4 rho^2                 rho < 1
///   gen:  1 + log2 E[1/|h|^2]               rho >= 1, E[1/|h|^2] finite
///   nak:  1 + log2(1 + 1/(m-1))             rho >= 1, Nakagami m > 1
///   gaus: 0.48 + log2(log2(1 + rho))        rho >= 1, Rayleigh
inline std::vector<Bound> gap_bounds_cor2(const FadingModel& model, double rho) {
  const ChannelMoments mo = channel_moments(model, 1, 1);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Bound> out;
  out.push_back({"siso_low_snr", mo.norm4_mean ? 1.45 * *mo.norm4_mean * rho * rho : nan,
                 rho < 1.0 && mo.norm4_mean.has_value(), "rho<1, E|h|^4 finite"});
  out.push_back({"siso_inverse_moment", mo.inv_gain2_mean ? 1.0 + std::log2(*mo.inv_gain2_mean) : nan,
                 rho >= 1.0 && mo.inv_gain2_mean.has_value(), "rho>=1, E[1/|h|^2] finite"});
  const bool nak = model.kind == FadingKind::Nakagami && model.m > 1.0;
  out.push_back({"siso_nakagami", nak ? 1.0 + std::log2(1.0 + 1.0 / (model.m - 1.0)) : nan, nak && rho >= 1.0,
                 "rho>=1, Nakagami m>1"});
  const bool ray = model.kind == FadingKind::RayleighIID;
  out.push_back({"siso_rayleigh", 0.48 + std::log2(std::log2(1.0 + rho)), ray && rho >= 1.0, "rho>=1, Rayleigh"});
  return out;
}

/// Single-antenna gap C - R = E[log2(1 + rho|h|^2)] + log2 E[1/(1 + rho|h|^2)]
/// with every single-antenna bound attached.
inline GapReport siso_gap(const FadingModel& model, double rho, std::uint64_t samples = kDefaultScalarSamples,
                          std::uint64_t seed = 1) {
  if (!(rho > 0.0)) throw std::invalid_argument("siso_gap: rho must be positive");
  const Moments mom = run_moments(2, samples, seed, [&](Rng& rng, std::span<double> out) {
    const double g = sample_gain2(model, rng);
    out[0] = std::log2(1.0 + rho * g);
    out[1] = 1.0 / (1.0 + rho * g);
  });
  const double m1 = mom.mean(1);
  GapReport r;
  r.capacity = mom.estimate(0);
  r.rate = mom.delta(-std::log2(m1), Eigen::Vector2d(0.0, -kLog2e / m1));
  r.gap = mom.delta(mom.mean(0) + std::log2(m1), Eigen::Vector2d(1.0, kLog2e / m1));
  r.applicable_bounds = gap_bounds_cor2(model, rho);
  return r;
}

/// SNR penalty alpha = E[|h|^2/(rho|h|^2 + 1)] / E[1/(rho|h|^2 + 1)].
inline McEstimate snr_penalty_alpha(const FadingModel& model, double rho, std::uint64_t samples = kDefaultScalarSamples,
                                    std::uint64_t seed = 1) {
  if (!(rho > 0.0)) throw std::invalid_argument("snr_penalty_alpha: rho must be positive");
  const Moments mom = run_moments(2, samples, seed, [&](Rng& rng, std::span<double> out) {
    const double g = sample_gain2(model, rng);
    out[0] = g / (rho * g + 1.0);
    out[1] = 1.0 / (rho * g + 1.0);
  });
  const double a = mom.mean(0), b = mom.mean(1);
  return mom.delta(a / b, Eigen::Vector2d(1.0 / b, -a / (b * b)));
}

/// Sum over l = 1..K N_t of log2(1 + (l+1)/(N_r - l)); needs N_r > K N_t.
inline double mac_gap_bound_cor3(std::size_t users, std::size_t n_t, std::size_t n_r) {
  const std::size_t l_max = users * n_t;
  if (users == 0 || n_t == 0) throw std::invalid_argument("mac_gap_bound_cor3: empty configuration");
  if (n_r <= l_max) throw std::domain_error("mac_gap_bound_cor3: needs N_r > K N_t");
  double acc = 0.0;
  for (std::size_t l = 1; l <= l_max; ++l)
    acc += std::log2(1.0 + static_cast<double>(l + 1) / static_cast<double>(n_r - l));
  return acc;
}

/// Two-user single-antenna MAC gap bounds (identically distributed users):
///   low:  1.45 (1 + 2E|h|^4) rho^2          rho < 1/2
///   gen:  2 + log2 E[1/|h|^2]               rho >= 1/2, E[1/|h|^2] finite
///   nak:  2 + log2(1 + 1/(m-1))             rho >= 1/2, Nakagami m > 1
///   gaus: 1.48 + log2(log2(1 + rho))        rho >= 1/2, Rayleigh
inline std::vector<Bound> gap_bounds_cor4(const FadingModel& model, double rho) {
  const ChannelMoments mo = channel_moments(model, 1, 1);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Bound> out;
  out.push_back({"mac2_low_snr", mo.norm4_mean ? 1.45 * (1.0 + 2.0 * *mo.norm4_mean) * rho * rho : nan,
                 rho < 0.5 && mo.norm4_mean.has_value(), "rho<1/2, E|h|^4 finite"});
  out.push_back({"mac2_inverse_moment", mo.inv_gain2_mean ? 2.0 + std::log2(*mo.inv_gain2_mean) : nan,
                 rho >= 0.5 && mo.inv_gain2_mean.has_value(), "rho>=1/2, E[1/|h|^2] finite"});
  const bool nak = model.kind == FadingKind::Nakagami && model.m > 1.0;
  out.push_back({"mac2_nakagami", nak ? 2.0 + std::log2(1.0 + 1.0 / (model.m - 1.0)) : nan, nak && rho >= 0.5,
                 "rho>=1/2, Nakagami m>1"});
  const bool ray = model.kind == FadingKind::RayleighIID;
  out.push_back({"mac2_rayleigh", 1.48 + std::log2(std::log2(1.0 + rho)), ray && rho >= 0.5, "rho>=1/2, Rayleigh"});
  return out;
}

/// Symmetric two-user single-antenna MAC: sum capacity, lattice sum rate and
/// their gap
///   E[log2(1 + rho|h1|^2 + rho|h2|^2)]
///     + log2(E[(1 + rho|h1|^2)/(1 + rho|h1|^2 + rho|h2|^2)] E[1/(1 + rho|h1|^2)]).
inline GapReport mac_gap_two_user(const FadingModel& model, double rho, std::uint64_t samples = kDefaultScalarSamples,
                                  std::uint64_t seed = 1) {
  if (!(rho > 0.0)) throw std::invalid_argument("mac_gap_two_user: rho must be positive");
  const Moments mom = run_moments(3, samples, seed, [&](Rng& rng, std::span<double> out) {
    const double g1 = sample_gain2(model, rng);
    const double g2 = sample_gain2(model, rng);
    const double s = 1.0 + rho * g1 + rho * g2;
    out[0] = std::log2(s);
    out[1] = (1.0 + rho * g1) / s;
    out[2] = 1.0 / (1.0 + rho * g1);
  });
  const double m1 = mom.mean(1), m2 = mom.mean(2);
  GapReport r;
  r.capacity = mom.estimate(0);
  r.rate = mom.delta(-std::log2(m1) - std::log2(m2), Eigen::Vector3d(0.0, -kLog2e / m1, -kLog2e / m2));
  r.gap = mom.delta(mom.mean(0) + std::log2(m1) + std::log2(m2), Eigen::Vector3d(1.0, kLog2e / m1, kLog2e / m2));
  r.applicable_bounds = gap_bounds_cor4(model, rho);
  return r;
}

struct MatrixEstimate {
  CMat mean;
  Eigen::MatrixXd std_error;  // per entry, real and imaginary parts combined in quadrature
  std::uint64_t samples = 0;
};

/// Monte Carlo mean of (G^H G)^{-1} for an i.i.d. unit-variance complex
/// Gaussian M x N matrix G; the exact answer is I/(M-N).
inline MatrixEstimate wishart_inverse_mean(std::size_t rows_m, std::size_t cols_n,
                                           std::uint64_t samples = kDefaultMatrixSamples, std::uint64_t seed = 1) {
  if (cols_n == 0 || rows_m <= cols_n) throw std::domain_error("wishart_inverse_mean: needs M > N >= 1");
  const auto n = static_cast<Eigen::Index>(cols_n);
  const FadingModel ray = FadingModel::rayleigh();
  const auto nn = static_cast<std::size_t>(n * n);
  const Moments mom = run_moments(2 * nn, samples, seed, [&](Rng& rng, std::span<double> out) {
    const CMat g = sample_channel(ray, rows_m, cols_n, rng);
    const CMat w = g.adjoint() * g;
    const CMat inv = w.llt().solve(CMat::Identity(n, n));
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(j * n + i)] = inv(i, j).real();
        out[nn + static_cast<std::size_t>(j * n + i)] = inv(i, j).imag();
      }
  });
  MatrixEstimate est;
  est.samples = mom.count();
  est.mean.resize(n, n);
  est.std_error.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(j * n + i);
      est.mean(i, j) = {mom.mean(k), mom.mean(nn + k)};
      const double se_re = mom.estimate(k).std_error, se_im = mom.estimate(nn + k).std_error;
      est.std_error(i, j) = std::hypot(se_re, se_im);
    }
  return est;
}

struct PsdDominanceResult {
  bool all_psd = true;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  std::uint64_t draws = 0;
};

/// Checks A^H (cI + B B^H)^{-1} A - (1/c) Abar^H Abar >= 0 on random draws of
/// i.i.d. complex Gaussian A (r x m), B (r x q). Abar collects the rows of
/// V^H A along the null eigenspace of B B^H (V its eigenvectors). The left side
/// is formed by a direct solve, independently of the eigendecomposition.
inline PsdDominanceResult psd_dominance_check(std::size_t r, std::size_t m, std::size_t q, double c,
                                              std::uint64_t samples = 1000, std::uint64_t seed = 1,
                                              double tolerance = 1e-9) {
  if (r < q + 1) throw std::domain_error("psd_dominance_check: needs r >= q + 1");
  if (m == 0) throw std::domain_error("psd_dominance_check: needs m >= 1");
  if (!(c > 0.0)) throw std::domain_error("psd_dominance_check: c must be positive");
  const auto rr = static_cast<Eigen::Index>(r);
  const auto null_dim = static_cast<Eigen::Index>(r - q);
  const FadingModel ray = FadingModel::rayleigh();
  std::vector<double> mins(samples);
  parallel_for(samples, [&](std::uint64_t s) {
    Rng rng = make_stream(seed, s);
    const CMat a = sample_channel(ray, r, m, rng);
    CMat bbh = CMat::Zero(rr, rr);
    if (q > 0) {
      const CMat b = sample_channel(ray, r, q, rng);
      bbh = b * b.adjoint();
    }
    const CMat lhs = a.adjoint() * (c * CMat::Identity(rr, rr) + bbh).llt().solve(a);
    Eigen::SelfAdjointEigenSolver<CMat> eig(bbh);  // ascending: null space first
    const CMat a_check = eig.eigenvectors().adjoint() * a;
    const CMat a_bar = a_check.topRows(null_dim);
    const CMat diff = lhs - a_bar.adjoint() * a_bar / c;
    const CMat herm = 0.5 * (diff + diff.adjoint());
    mins[s] = Eigen::SelfAdjointEigenSolver<CMat>(herm, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  });
  PsdDominanceResult res;
  res.draws = samples;
  for (double v : mins) {
    res.min_eigenvalue = std::min(res.min_eigenvalue, v);
    if (v < -tolerance) res.all_psd = false;
  }
  return res;
}

}  // namespace latfade
