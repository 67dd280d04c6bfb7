#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "latfade/random.hpp"

namespace latfade {

using CMat = Eigen::MatrixXcd;

enum class FadingKind { RayleighIID, Nakagami, Deterministic };

/// Per-time distribution of the channel matrix. Draws are i.i.d. across time.
struct FadingModel {
  FadingKind kind = FadingKind::RayleighIID;
  double m = 1.0;  // Nakagami shape
  CMat matrix;     // Deterministic value
  bool unit_power = true;

  static FadingModel rayleigh() { return {}; }

  static FadingModel nakagami(double m) {
    if (!(m > 0.0)) throw std::invalid_argument("nakagami: m must be positive");
    FadingModel f;
    f.kind = FadingKind::Nakagami;
    f.m = m;
    return f;
  }

  static FadingModel fixed(CMat h) {
    FadingModel f;
    f.kind = FadingKind::Deterministic;
    f.matrix = std::move(h);
    f.unit_power = false;
    return f;
  }

  std::string name() const {
    switch (kind) {
      case FadingKind::RayleighIID:
        return "rayleigh";
      case FadingKind::Nakagami: {
        std::ostringstream os;
        os << "nakagami:m=" << m;
        return os.str();
      }
      case FadingKind::Deterministic:
        return "fixed";
    }
    return "unknown";
  }
};

enum class SignalMode { Real, Complex };

/// Antenna counts, per-antenna SNR (linear), block length in channel uses.
struct LinkConfig {
  std::size_t n_t = 1;
  std::size_t n_r = 1;
  double rho = 1.0;
  std::size_t block_len = 1;
  SignalMode mode = SignalMode::Complex;

  void validate() const {
    if (n_t == 0 || n_r == 0) throw std::invalid_argument("link: antenna counts must be positive");
    if (!(rho > 0.0)) throw std::invalid_argument("link: rho must be positive");
    if (block_len == 0) throw std::invalid_argument("link: block length must be positive");
  }

  std::size_t real_factor() const { return mode == SignalMode::Complex ? 2 : 1; }
  std::size_t tx_dim() const { return n_t * real_factor(); }
  std::size_t rx_dim() const { return n_r * real_factor(); }
  /// Dimension of the (realified) codeword: N_t * n, doubled in complex mode.
  std::size_t lattice_dim() const { return tx_dim() * block_len; }
  /// Signal power per real dimension; a complex symbol of power rho splits evenly.
  double signal_power() const { return mode == SignalMode::Complex ? rho / 2.0 : rho; }
  /// Noise variance per real dimension.
  double noise_variance() const { return mode == SignalMode::Complex ? 0.5 : 1.0; }
};

/// |h|^2 of a scalar draw; the fast path for single-antenna expectations.
template <class Gen>
double sample_gain2(const FadingModel& model, Gen& rng) {
  switch (model.kind) {
    case FadingKind::RayleighIID: {
      std::exponential_distribution<double> e(1.0);
      return e(rng);
    }
    case FadingKind::Nakagami: {
      std::gamma_distribution<double> g(model.m, 1.0 / model.m);
      return g(rng);
    }
    case FadingKind::Deterministic:
      if (model.matrix.size() == 0) throw std::invalid_argument("fixed model: empty matrix");
      return std::norm(model.matrix(0, 0));
  }
  return 0.0;
}

/// One draw of the n_r x n_t complex channel.
template <class Gen>
CMat sample_channel(const FadingModel& model, std::size_t n_r, std::size_t n_t, Gen& rng) {
  if (n_r == 0 || n_t == 0) throw std::invalid_argument("sample_channel: dimensions must be positive");
  const auto rows = static_cast<Eigen::Index>(n_r), cols = static_cast<Eigen::Index>(n_t);
  if (model.kind == FadingKind::Deterministic) {
    if (model.matrix.rows() != rows || model.matrix.cols() != cols)
      throw std::invalid_argument("sample_channel: fixed matrix is " + std::to_string(model.matrix.rows()) + "x" +
                                  std::to_string(model.matrix.cols()) + ", requested " + std::to_string(n_r) + "x" +
                                  std::to_string(n_t));
    return model.matrix;
  }
  CMat h(rows, cols);
  if (model.kind == FadingKind::RayleighIID) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double re = g(rng);
        const double im = g(rng);
        h(i, j) = {re, im};
      }
    return h;
  }
  std::gamma_distribution<double> power(model.m, 1.0 / model.m);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double amp = std::sqrt(power(rng));
      h(i, j) = std::polar(amp, phase(rng));
    }
  return h;
}

/// Real-valued channel for the real signal model: Gaussian entries for
/// Rayleigh, random-sign Nakagami amplitudes, the real part of a fixed matrix.
template <class Gen>
Eigen::MatrixXd sample_real_channel(const FadingModel& model, std::size_t n_r, std::size_t n_t, Gen& rng) {
  if (n_r == 0 || n_t == 0) throw std::invalid_argument("sample_real_channel: dimensions must be positive");
  const auto rows = static_cast<Eigen::Index>(n_r), cols = static_cast<Eigen::Index>(n_t);
  if (model.kind == FadingKind::Deterministic) {
    if (model.matrix.rows() != rows || model.matrix.cols() != cols)
      throw std::invalid_argument("sample_real_channel: fixed matrix has the wrong shape");
    return model.matrix.real();
  }
  Eigen::MatrixXd h(rows, cols);
  if (model.kind == FadingKind::RayleighIID) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) h(i, j) = g(rng);
    return h;
  }
  std::gamma_distribution<double> power(model.m, 1.0 / model.m);
  std::bernoulli_distribution sign(0.5);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double amp = std::sqrt(power(rng));
      h(i, j) = sign(rng) ? amp : -amp;
    }
  return h;
}

/// [[Re H, -Im H], [Im H, Re H]].
inline Eigen::MatrixXd realify(const CMat& h) {
  const auto r = h.rows(), c = h.cols();
  Eigen::MatrixXd out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = h.real();
  out.topRightCorner(r, c) = -h.imag();
  out.bottomLeftCorner(r, c) = h.imag();
  out.bottomRightCorner(r, c) = h.real();
  return out;
}

/// Channel for one time instant in the link's real coordinates
/// (rx_dim x tx_dim).
template <class Gen>
Eigen::MatrixXd sample_link_channel(const FadingModel& model, const LinkConfig& link, Gen& rng) {
  if (link.mode == SignalMode::Complex) return realify(sample_channel(model, link.n_r, link.n_t, rng));
  return sample_real_channel(model, link.n_r, link.n_t, rng);
}

/// i.i.d. zero-mean Gaussian vector with the given per-entry variance.
template <class Gen>
Eigen::VectorXd sample_noise(std::size_t dim, Gen& rng, double variance = 1.0) {
  if (dim == 0) throw std::invalid_argument("sample_noise: dim must be >= 1");
  std::normal_distribution<double> g(0.0, std::sqrt(variance));
  Eigen::VectorXd w(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = g(rng);
  return w;
}

/// Parses a matrix: one row per line, entries either real numbers or
/// "(re,im)" pairs, whitespace separated.
inline CMat parse_matrix_text(std::string_view text) {
  std::vector<std::vector<std::complex<double>>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::complex<double>> row;
    std::string tok;
    while (ls >> tok) {
      std::istringstream ts(tok);
      std::complex<double> v;
      if (tok.front() == '(') {
        ts >> v;
      } else {
        double re;
        ts >> re;
        v = re;
      }
      if (ts.fail() || !(ts >> std::ws).eof()) throw std::invalid_argument("matrix: bad entry '" + tok + "'");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("matrix: no rows");
  CMat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw std::invalid_argument("matrix: ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

/// "rayleigh", "nakagami:m=<val>", or "fixed:<matrix file>".
inline FadingModel parse_fading_model(const std::string& key) {
  if (key == "rayleigh") return FadingModel::rayleigh();
  if (key.rfind("nakagami:m=", 0) == 0) {
    const std::string v = key.substr(11);
    std::size_t used = 0;
    double m = 0.0;
    try {
      m = std::stod(v, &used);
    } catch (...) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw std::invalid_argument("fading model: bad Nakagami m in '" + key + "'");
    return FadingModel::nakagami(m);
  }
  if (key.rfind("fixed:", 0) == 0) {
    const std::string path = key.substr(6);
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("fading model: cannot read matrix file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return FadingModel::fixed(parse_matrix_text(buf.str()));
  }
  throw std::invalid_argument("fading model: unknown key '" + key + "' (rayleigh | nakagami:m=<val> | fixed:<file>)");
}

}  // namespace latfade
