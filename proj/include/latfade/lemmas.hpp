#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "latfade/lattice.hpp"
#include "latfade/montecarlo.hpp"

namespace latfade {

/// Upper tail P(X >= stat) for a chi-square variable with `dof` degrees of freedom.
inline double chi_square_p_value(double stat, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("chi_square_p_value: dof must be positive");
  if (stat <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

/// Pearson statistic against equal expected counts.
inline double chi_square_uniform_stat(const std::vector<std::uint64_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

/// Pearson independence statistic for a rows x cols contingency table
/// (row-major). Empty rows or columns are skipped, dof adjusted accordingly.
struct IndependenceTest {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

inline IndependenceTest chi_square_independence(const std::vector<std::uint64_t>& table, std::size_t rows,
                                                std::size_t cols) {
  if (table.size() != rows * cols) throw std::invalid_argument("chi_square_independence: table size mismatch");
  std::vector<double> rs(rows, 0.0), cs(cols, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = static_cast<double>(table[r * cols + c]);
      rs[r] += v;
      cs[c] += v;
      total += v;
    }
  IndependenceTest out;
  const auto live_r = std::count_if(rs.begin(), rs.end(), [](double v) { return v > 0.0; });
  const auto live_c = std::count_if(cs.begin(), cs.end(), [](double v) { return v > 0.0; });
  if (live_r < 2 || live_c < 2) return out;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (rs[r] == 0.0 || cs[c] == 0.0) continue;
      const double e = rs[r] * cs[c] / total;
      const double d = static_cast<double>(table[r * cols + c]) - e;
      out.statistic += d * d / e;
    }
  out.dof = static_cast<double>((live_r - 1) * (live_c - 1));
  out.p_value = chi_square_p_value(out.statistic, out.dof);
  return out;
}

struct CryptoLemmaResult {
  double p_uniform = 0.0;       // first coordinate of x over the coarse cell
  double p_independence = 0.0;  // (x bin, message) contingency table
  double max_cell_excursion = 0.0;  // largest |x_i| / half cell side; must be <= 1
};

/// x = [t - d] mod coarse with d uniform over the coarse cell is uniform over
/// the cell and independent of t. The coarse lattice must be a scaled Z^n.
inline CryptoLemmaResult crypto_lemma_check(const NestedPair& pair, std::uint64_t samples, std::uint64_t seed,
                                            std::size_t uniform_bins = 20, std::size_t joint_bins = 10) {
  if (pair.coarse().kind() == LatticeKind::ConstructionA)
    throw std::invalid_argument("crypto_lemma_check: needs a cubic coarse lattice");
  const double side = pair.coarse().scale();
  const std::size_t messages = static_cast<std::size_t>(std::min<std::uint64_t>(pair.codebook_size(), 64));
  std::vector<std::uint64_t> uni(uniform_bins, 0), joint(joint_bins * messages, 0);
  std::vector<std::uint32_t> ub(samples), jb(samples), mb(samples);
  std::vector<double> exc(samples);
  parallel_for(samples, [&](std::uint64_t s) {
    Rng rng = make_stream(seed, s);
    std::uniform_int_distribution<std::uint64_t> msg(0, messages - 1);
    const std::uint64_t m = msg(rng);
    const Vec t = pair.codeword(m);
    const Vec x = pair.coarse().mod(t - sample_dither(pair, rng));
    const double u = x(0) / side + 0.5;  // in [0, 1)
    ub[s] = static_cast<std::uint32_t>(std::clamp(u * static_cast<double>(uniform_bins), 0.0,
                                                  static_cast<double>(uniform_bins - 1)));
    jb[s] = static_cast<std::uint32_t>(
        std::clamp(u * static_cast<double>(joint_bins), 0.0, static_cast<double>(joint_bins - 1)));
    mb[s] = static_cast<std::uint32_t>(m);
    exc[s] = x.cwiseAbs().maxCoeff() / (0.5 * side);
  });
  CryptoLemmaResult r;
  for (std::uint64_t s = 0; s < samples; ++s) {
    ++uni[ub[s]];
    ++joint[jb[s] * messages + mb[s]];
    r.max_cell_excursion = std::max(r.max_cell_excursion, exc[s]);
  }
  r.p_uniform = chi_square_p_value(chi_square_uniform_stat(uni), static_cast<double>(uniform_bins - 1));
  r.p_independence = messages > 1 ? chi_square_independence(joint, joint_bins, messages).p_value : 1.0;
  return r;
}

/// Largest |mod(s + t) - mod(s + mod(t))| over random pairs (s, t) drawn
/// uniformly from [-spread, spread]^n.
inline double mod_identity_residual(const Lattice& lat, std::uint64_t pairs, std::uint64_t seed, double spread = 10.0) {
  Rng rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> u(-spread, spread);
  const auto n = static_cast<Eigen::Index>(lat.dimension());
  double worst = 0.0;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    Vec s(n), t(n);
    for (Eigen::Index j = 0; j < n; ++j) s(j) = u(rng) * lat.scale();
    for (Eigen::Index j = 0; j < n; ++j) t(j) = u(rng) * lat.scale();
    worst = std::max(worst, (lat.mod(s + t) - lat.mod(s + lat.mod(t))).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace latfade
