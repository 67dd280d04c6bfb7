#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "latfade/analysis.hpp"
#include "latfade/channel.hpp"
#include "latfade/lattice.hpp"
#include "latfade/montecarlo.hpp"
#include "latfade/transceiver.hpp"

namespace latfade {

/// K users with n_t antennas each; every antenna is an independently encoded
/// virtual user. Powers are per complex symbol; virtual users of user k get
/// rho_star[k] each, so user k's total is n_t * rho_star[k].
struct MacConfig {
  std::size_t users = 2;
  std::size_t n_t = 1;
  std::size_t n_r = 1;
  std::vector<double> rho_star;  // per user; size == users
  std::vector<double> virtual_powers;

  static MacConfig uniform(std::size_t users, std::size_t n_t, std::size_t n_r, double rho) {
    return with_powers(n_t, n_r, std::vector<double>(users, rho));
  }

  static MacConfig with_powers(std::size_t n_t, std::size_t n_r, std::vector<double> rho_star) {
    MacConfig c;
    c.users = rho_star.size();
    c.n_t = n_t;
    c.n_r = n_r;
    c.rho_star = std::move(rho_star);
    for (double r : c.rho_star)
      for (std::size_t a = 0; a < n_t; ++a) c.virtual_powers.push_back(r);
    c.validate();
    return c;
  }

  std::size_t virtual_users() const { return users * n_t; }
  std::size_t owner(std::size_t virtual_user) const { return virtual_user / n_t; }

  void validate() const {
    if (users == 0 || n_t == 0 || n_r == 0) throw std::invalid_argument("mac: counts must be positive");
    if (rho_star.size() != users || virtual_powers.size() != virtual_users())
      throw std::invalid_argument("mac: power vector sizes do not match");
    for (std::size_t k = 0; k < users; ++k) {
      double total = 0.0;
      for (std::size_t a = 0; a < n_t; ++a) {
        const double p = virtual_powers[k * n_t + a];
        if (!(p >= 0.0)) throw std::invalid_argument("mac: negative virtual power");
        total += p;
      }
      if (std::abs(total - static_cast<double>(n_t) * rho_star[k]) > 1e-12 * std::max(1.0, total))
        throw std::invalid_argument("mac: virtual powers do not add up to the user's budget");
    }
  }
};

/// Permutation of 0..L-1; order[0] is decoded first.
using DecodingOrder = std::vector<std::size_t>;

inline void check_order(const DecodingOrder& order, std::size_t l) {
  if (order.size() != l) throw std::invalid_argument("decoding order: wrong length");
  std::vector<bool> seen(l, false);
  for (auto v : order) {
    if (v >= l || seen[v]) throw std::invalid_argument("decoding order: not a permutation");
    seen[v] = true;
  }
}

inline DecodingOrder identity_order(std::size_t l) {
  DecodingOrder o(l);
  std::iota(o.begin(), o.end(), std::size_t{0});
  return o;
}

inline constexpr std::size_t kMaxOrderEnumeration = 6;

/// All L! orders in lexicographic order.
inline std::vector<DecodingOrder> enumerate_orders(std::size_t l) {
  if (l == 0 || l > kMaxOrderEnumeration) throw std::invalid_argument("enumerate_orders: need 1 <= L <= 6");
  std::vector<DecodingOrder> out;
  DecodingOrder o = identity_order(l);
  do out.push_back(o);
  while (std::next_permutation(o.begin(), o.end()));
  return out;
}

/// F = I + sum_{j > stage} rho_{order[j]} h_{order[j]} h_{order[j]}^H, with the
/// virtual users' channels as the columns of `h`. Stage is 0-based.
inline CMat mac_interference_matrix(const DecodingOrder& order, std::size_t stage, const CMat& h,
                                    const std::vector<double>& powers) {
  const auto l = static_cast<std::size_t>(h.cols());
  check_order(order, l);
  if (stage >= l) throw std::invalid_argument("mac_interference_matrix: stage out of range");
  if (powers.size() != l) throw std::invalid_argument("mac_interference_matrix: power count != L");
  CMat f = CMat::Identity(h.rows(), h.rows());
  for (std::size_t j = stage + 1; j < l; ++j) {
    const auto c = static_cast<Eigen::Index>(order[j]);
    f.noalias() += powers[order[j]] * h.col(c) * h.col(c).adjoint();
  }
  return f;
}

/// Per-stage effective SINR rho h^H F^{-1} h for one draw.
inline std::vector<double> stage_sinrs(const DecodingOrder& order, const CMat& h, const std::vector<double>& powers) {
  const auto l = static_cast<std::size_t>(h.cols());
  std::vector<double> out(l);
  for (std::size_t s = 0; s < l; ++s) {
    const auto c = static_cast<Eigen::Index>(order[s]);
    const CMat f = mac_interference_matrix(order, s, h, powers);
    const Eigen::VectorXcd sol = f.llt().solve(h.col(c));
    out[s] = powers[order[s]] * std::max(0.0, h.col(c).dot(sol).real());
  }
  return out;
}

template <class Gen>
CMat sample_mac_channel(const FadingModel& model, const MacConfig& cfg, Gen& rng) {
  return sample_channel(model, cfg.n_r, cfg.virtual_users(), rng);
}

struct CornerPoint {
  DecodingOrder order;
  std::vector<McEstimate> rates;       // indexed by virtual user, bits per channel use
  std::vector<McEstimate> log_inside;  // E[log2(1 + SINR)] per virtual user
  McEstimate sum_rate;
  McEstimate sum_log_inside;  // equals the sum capacity draw by draw (chain rule)
  McEstimate sum_gap;         // sum_log_inside - sum_rate
  std::vector<double> stage_mean_inverse;  // E[1/(1 + SINR)] per virtual user

  /// Rate of user k: sum over its virtual users.
  double user_rate(const MacConfig& cfg, std::size_t k) const {
    double acc = 0.0;
    for (std::size_t a = 0; a < cfg.n_t; ++a) acc += rates[k * cfg.n_t + a].mean;
    return acc;
  }
};

/// R_{order[s]} = -log2 E[1/(1 + rho h^H F^{-1} h)] for each stage s.
inline CornerPoint corner_rates_mc(const MacConfig& cfg, const FadingModel& model, const DecodingOrder& order,
                                   std::uint64_t samples = kDefaultScalarSamples, std::uint64_t seed = 1) {
  cfg.validate();
  const std::size_t l = cfg.virtual_users();
  check_order(order, l);
  const Moments mom = run_moments(2 * l, samples, seed, [&](Rng& rng, std::span<double> out) {
    const CMat h = sample_mac_channel(model, cfg, rng);
    const std::vector<double> sinr = stage_sinrs(order, h, cfg.virtual_powers);
    for (std::size_t s = 0; s < l; ++s) {
      out[order[s]] = 1.0 / (1.0 + sinr[s]);
      out[l + order[s]] = std::log2(1.0 + sinr[s]);
    }
  });
  CornerPoint cp;
  cp.order = order;
  Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * l));
  Eigen::VectorXd g_log = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * l));
  double sum = 0.0, sum_log = 0.0;
  for (std::size_t v = 0; v < l; ++v) {
    const double m = mom.mean(v);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * l));
    g(static_cast<Eigen::Index>(v)) = -kLog2e / m;
    cp.rates.push_back(mom.delta(-std::log2(m), g));
    cp.log_inside.push_back(mom.estimate(l + v));
    cp.stage_mean_inverse.push_back(m);
    g_sum(static_cast<Eigen::Index>(v)) = -kLog2e / m;
    g_log(static_cast<Eigen::Index>(l + v)) = 1.0;
    sum += -std::log2(m);
    sum_log += mom.mean(l + v);
  }
  cp.sum_rate = mom.delta(sum, g_sum);
  cp.sum_log_inside = mom.delta(sum_log, g_log);
  cp.sum_gap = mom.delta(sum_log - sum, g_log - g_sum);
  return cp;
}

/// E[log2 det(I + sum_l rho_l h_l h_l^H)].
inline McEstimate sum_capacity_mc(const MacConfig& cfg, const FadingModel& model,
                                  std::uint64_t samples = kDefaultScalarSamples, std::uint64_t seed = 1) {
  cfg.validate();
  const auto nr = static_cast<Eigen::Index>(cfg.n_r);
  const Moments mom = run_moments(1, samples, seed, [&](Rng& rng, std::span<double> out) {
    const CMat h = sample_mac_channel(model, cfg, rng);
    CMat a = CMat::Identity(nr, nr);
    for (Eigen::Index c = 0; c < h.cols(); ++c)
      a.noalias() += cfg.virtual_powers[static_cast<std::size_t>(c)] * h.col(c) * h.col(c).adjoint();
    const Eigen::LLT<CMat> llt(a);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < nr; ++i) logdet += 2.0 * std::log2(llt.matrixLLT()(i, i).real());
    out[0] = logdet;
  });
  return mom.estimate(0);
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Convex hull, counter-clockwise, collinear points dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 1e-15) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 1e-15) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Two-user single-antenna region:
///   gamma1 = log2 E[1/(1 + rho1|h1|^2)]
///   gamma2 = log2 E[1/(1 + rho2|h2|^2)]
///   gamma3 = log2 E[1/(1 + rho1|h1|^2/(1 + rho2|h2|^2))]
///   gamma4 = log2 E[1/(1 + rho2|h2|^2/(1 + rho1|h1|^2))]
/// all from the same draws.
struct TwoUserRegion {
  McEstimate gamma[4];
  Point2 corner_user1_first;  // (-gamma3, -gamma2)
  Point2 corner_user2_first;  // (-gamma1, -gamma4)
  std::vector<Point2> hull;

  double g(int i) const { return gamma[i - 1].mean; }

  /// R1 < -g1, R2 < -g2, (g4 - g2) R1 + (g3 - g1) R2 < g1 g2 - g3 g4, with
  /// `slack` added to every right-hand side.
  bool contains(double r1, double r2, double slack = 0.0) const {
    return r1 < -g(1) + slack && r2 < -g(2) + slack &&
           (g(4) - g(2)) * r1 + (g(3) - g(1)) * r2 < g(1) * g(2) - g(3) * g(4) + slack;
  }
};

inline TwoUserRegion two_user_region(const MacConfig& cfg, const FadingModel& model,
                                     std::uint64_t samples = kDefaultScalarSamples, std::uint64_t seed = 1) {
  cfg.validate();
  if (cfg.users != 2 || cfg.n_t != 1 || cfg.n_r != 1)
    throw std::invalid_argument("two_user_region: needs two single-antenna users and one receive antenna");
  const double p1 = cfg.virtual_powers[0], p2 = cfg.virtual_powers[1];
  const Moments mom = run_moments(4, samples, seed, [&](Rng& rng, std::span<double> out) {
    const CMat h = sample_mac_channel(model, cfg, rng);
    const double s1 = p1 * std::norm(h(0, 0)), s2 = p2 * std::norm(h(0, 1));
    out[0] = 1.0 / (1.0 + s1);
    out[1] = 1.0 / (1.0 + s2);
    out[2] = 1.0 / (1.0 + s1 / (1.0 + s2));
    out[3] = 1.0 / (1.0 + s2 / (1.0 + s1));
  });
  TwoUserRegion r;
  for (int i = 0; i < 4; ++i) {
    const double m = mom.mean(static_cast<std::size_t>(i));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
    g(i) = kLog2e / m;
    r.gamma[i] = mom.delta(std::log2(m), g);
  }
  r.corner_user1_first = {-r.g(3), -r.g(2)};
  r.corner_user2_first = {-r.g(1), -r.g(4)};
  r.hull = convex_hull({{0.0, 0.0}, {-r.g(1), 0.0}, {0.0, -r.g(2)}, r.corner_user1_first, r.corner_user2_first});
  return r;
}

/// Per-stage outcome of one successive-cancellation trial, indexed by stage.
struct MacTrial {
  std::vector<bool> ok_ambiguity;
  std::vector<bool> ok_euclidean;
  std::vector<AmbiguityOutcome> outcome;
};

/// Shared read-only state for MAC trials: per-stage decision radii for a
/// whole block (indexed by stage). Virtual users with zero power stay silent
/// and are skipped by the decoder.
struct MacSetup {
  MacConfig cfg;
  FadingModel model;
  DecodingOrder order;
  std::size_t block_len = 1;
  std::vector<double> radius;
};

/// Decision radii sqrt((1 + eps) n rho_l E[1/(1 + SINR_l)]) from the corner
/// statistics of the given order, n = block_len channel uses.
inline std::vector<double> mac_decision_radii(const CornerPoint& corner, const MacConfig& cfg, std::size_t block_len,
                                              double epsilon) {
  std::vector<double> out;
  for (std::size_t s = 0; s < corner.order.size(); ++s) {
    const std::size_t v = corner.order[s];
    const double trace = static_cast<double>(block_len) * cfg.virtual_powers[v] * corner.stage_mean_inverse[v];
    out.push_back(trace > 0.0 ? decision_radius(trace, epsilon) : 0.0);
  }
  return out;
}

/// Genie-free SIC over one block. Two chains share the realization: the
/// sphere-decoder chain stops cancelling at its first non-unique outcome
/// (that and every later stage count as errors); the Euclidean chain always
/// subtracts its own re-encoded decision.
template <class Gen>
MacTrial run_mac_trial(const MacSetup& setup, const std::vector<NestedPair>& pairs, Gen& rng) {
  const MacConfig& cfg = setup.cfg;
  const std::size_t l = cfg.virtual_users();
  check_order(setup.order, l);
  if (pairs.size() != l || setup.radius.size() != l) throw std::invalid_argument("run_mac_trial: need one pair per virtual user");
  const std::size_t n = setup.block_len;
  for (const auto& p : pairs)
    if (p.dimension() != 2 * n) throw std::invalid_argument("run_mac_trial: lattice dimension != 2 * block_len");

  std::vector<Codeword> cw;
  cw.reserve(l);
  for (std::size_t v = 0; v < l; ++v) {
    std::uniform_int_distribution<std::uint64_t> msg(0, pairs[v].codebook_size() - 1);
    cw.push_back(encode(pairs[v], msg(rng), rng));
    if (cfg.virtual_powers[v] == 0.0) cw.back().x.setZero();  // silent virtual user
  }
  const auto rx_dim = static_cast<Eigen::Index>(2 * cfg.n_r);
  std::vector<Mat> h(n);  // realified channel per use, 2 n_r x 2 L
  std::vector<Vec> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CMat hc = sample_mac_channel(setup.model, cfg, rng);
    Mat hr(rx_dim, static_cast<Eigen::Index>(2 * l));
    for (std::size_t v = 0; v < l; ++v)
      hr.middleCols(static_cast<Eigen::Index>(2 * v), 2) = realify(hc.col(static_cast<Eigen::Index>(v)));
    Vec acc = sample_noise(2 * cfg.n_r, rng, 0.5);
    for (std::size_t v = 0; v < l; ++v)
      acc += hr.middleCols(static_cast<Eigen::Index>(2 * v), 2) * cw[v].x.segment(static_cast<Eigen::Index>(2 * i), 2);
    h[i] = std::move(hr);
    y[i] = std::move(acc);
  }

  MacTrial out;
  out.ok_ambiguity.assign(l, false);
  out.ok_euclidean.assign(l, false);
  out.outcome.assign(l, AmbiguityOutcome::Outside);
  std::vector<Vec> res_amb = y, res_euc = y;
  bool amb_alive = true;

  auto stage_input = [&](const std::vector<Vec>& res, std::size_t s) {
    const std::size_t v = setup.order[s];
    const double pv = cfg.virtual_powers[v] / 2.0;
    Vec yp(static_cast<Eigen::Index>(2 * n));
    for (std::size_t i = 0; i < n; ++i) {
      Mat cov = 0.5 * Mat::Identity(rx_dim, rx_dim);
      for (std::size_t j = s; j < l; ++j) {
        const std::size_t u = setup.order[j];
        const auto hu = h[i].middleCols(static_cast<Eigen::Index>(2 * u), 2);
        cov.noalias() += (cfg.virtual_powers[u] / 2.0) * hu * hu.transpose();
      }
      const auto hv = h[i].middleCols(static_cast<Eigen::Index>(2 * v), 2);
      const Mat ut = pv * cov.llt().solve(Mat(hv)).transpose();
      yp.segment(static_cast<Eigen::Index>(2 * i), 2) = ut * res[i];
    }
    return Vec(yp + cw[v].d);
  };
  auto cancel = [&](std::vector<Vec>& res, std::size_t v, const Vec& t_hat) {
    const Vec x_hat = pairs[v].coarse().mod(t_hat - cw[v].d);
    for (std::size_t i = 0; i < n; ++i)
      res[i] -= h[i].middleCols(static_cast<Eigen::Index>(2 * v), 2) * x_hat.segment(static_cast<Eigen::Index>(2 * i), 2);
  };

  for (std::size_t s = 0; s < l; ++s) {
    const std::size_t v = setup.order[s];
    const NestedPair& pair = pairs[v];
    if (cfg.virtual_powers[v] == 0.0) {
      out.ok_ambiguity[s] = amb_alive;
      out.ok_euclidean[s] = true;
      out.outcome[s] = AmbiguityOutcome::Unique;
      continue;
    }
    const Vec yp_euc = stage_input(res_euc, s);
    const DecodeResult euc = euclidean_decode(yp_euc, pair);
    out.ok_euclidean[s] = same_codeword(pair, euc.t_hat, cw[v].t);
    cancel(res_euc, v, euc.t_hat);

    if (!amb_alive) continue;
    const DecodeResult amb = ambiguity_decode(stage_input(res_amb, s), pair, setup.radius[s]);
    out.outcome[s] = amb.ambiguity_outcome;
    if (!amb.decided()) {
      amb_alive = false;
      continue;
    }
    out.ok_ambiguity[s] = same_codeword(pair, amb.t_hat, cw[v].t);
    cancel(res_amb, v, amb.t_hat);
  }
  return out;
}

struct MacBatch {
  std::uint64_t trials = 0;
  std::vector<std::uint64_t> err_ambiguity;  // per stage
  std::vector<std::uint64_t> err_euclidean;  // per stage
  std::vector<std::uint64_t> non_unique;     // per stage
  std::uint64_t block_err_ambiguity = 0;
  std::uint64_t block_err_euclidean = 0;
};

inline MacBatch run_mac_batch(const MacSetup& setup, const std::vector<NestedPair>& pairs, std::uint64_t trials,
                              std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("run_mac_batch: trials must be >= 1");
  std::vector<MacTrial> rec(trials);
  parallel_for(trials, [&](std::uint64_t i) {
    Rng rng = make_stream(seed, i);
    rec[i] = run_mac_trial(setup, pairs, rng);
  });
  const std::size_t l = setup.cfg.virtual_users();
  MacBatch b;
  b.trials = trials;
  b.err_ambiguity.assign(l, 0);
  b.err_euclidean.assign(l, 0);
  b.non_unique.assign(l, 0);
  for (const auto& r : rec) {
    bool any_a = false, any_e = false;
    for (std::size_t s = 0; s < l; ++s) {
      if (!r.ok_ambiguity[s]) ++b.err_ambiguity[s], any_a = true;
      if (!r.ok_euclidean[s]) ++b.err_euclidean[s], any_e = true;
      if (r.outcome[s] != AmbiguityOutcome::Unique) ++b.non_unique[s];
    }
    b.block_err_ambiguity += any_a ? 1 : 0;
    b.block_err_euclidean += any_e ? 1 : 0;
  }
  return b;
}

}  // namespace latfade
