#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "latfade/montecarlo.hpp"
#include "latfade/random.hpp"
#include "latfade/sphere_enumeration.hpp"

namespace latfade {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tolerance for deciding that two lattice points coincide.
inline constexpr double kLatticeTol = 1e-9;

/// Largest dimension decoded by sphere enumeration.
inline constexpr std::size_t kMaxEnumerationDim = 16;

enum class LatticeKind { IntegerZn, ScaledZn, ConstructionA };

namespace detail {

inline std::int64_t mod_p(std::int64_t a, std::int64_t p) {
  const std::int64_t r = a % p;
  return r < 0 ? r + p : r;
}

inline std::int64_t inverse_mod_p(std::int64_t a, std::int64_t p) {
  // p is prime: a^(p-2) mod p
  std::int64_t result = 1, base = mod_p(a, p), e = p - 2;
  while (e > 0) {
    if (e & 1) result = result * base % p;
    base = base * base % p;
    e >>= 1;
  }
  return result;
}

inline bool is_prime(std::int64_t p) {
  if (p < 2) return false;
  for (std::int64_t d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

// Round half toward -inf, so exact ties resolve to the lexicographically
// lower lattice point.
inline double round_ties_down(double x) { return std::ceil(x - 0.5); }

}  // namespace detail

/// Linear code over the integers mod p given by a k x n generator.
struct LinearCode {
  std::int64_t p = 2;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> generator;  // k x n

  std::size_t length() const { return static_cast<std::size_t>(generator.cols()); }
  std::size_t dimension() const { return static_cast<std::size_t>(generator.rows()); }
};

/// Reduced row echelon form mod p; returns the pivot columns. Throws when the
/// generator is rank deficient.
inline std::vector<Eigen::Index> row_reduce_mod_p(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& g,
                                                  std::int64_t p) {
  const Eigen::Index k = g.rows(), n = g.cols();
  std::vector<Eigen::Index> pivots;
  Eigen::Index row = 0;
  for (Eigen::Index col = 0; col < n && row < k; ++col) {
    Eigen::Index pivot = -1;
    for (Eigen::Index r = row; r < k; ++r)
      if (detail::mod_p(g(r, col), p) != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    g.row(row).swap(g.row(pivot));
    const std::int64_t inv = detail::inverse_mod_p(g(row, col), p);
    for (Eigen::Index j = 0; j < n; ++j) g(row, j) = detail::mod_p(g(row, j) * inv, p);
    for (Eigen::Index r = 0; r < k; ++r) {
      if (r == row) continue;
      const std::int64_t f = detail::mod_p(g(r, col), p);
      if (f == 0) continue;
      for (Eigen::Index j = 0; j < n; ++j) g(r, j) = detail::mod_p(g(r, j) - f * g(row, j), p);
    }
    pivots.push_back(col);
    ++row;
  }
  if (row < k) throw std::invalid_argument("construction A: code generator is not full row rank mod p");
  return pivots;
}

/// Systematic code [I_k | A] with A uniform over the integers mod p.
inline LinearCode random_systematic_code(std::size_t n, std::size_t k, std::int64_t p, std::uint64_t seed) {
  if (k > n) throw std::invalid_argument("random_systematic_code: k > n");
  LinearCode code;
  code.p = p;
  code.generator = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(static_cast<Eigen::Index>(k),
                                                                                     static_cast<Eigen::Index>(n));
  Rng rng = make_stream(seed, 0x636f6465);
  std::uniform_int_distribution<std::int64_t> coef(0, p - 1);
  for (Eigen::Index r = 0; r < code.generator.rows(); ++r) {
    code.generator(r, r) = 1;
    for (Eigen::Index c = code.generator.rows(); c < code.generator.cols(); ++c) code.generator(r, c) = coef(rng);
  }
  return code;
}

/// A full-rank lattice in R^n with nearest-point and modulo services.
/// Immutable after construction.
class Lattice {
 public:
  static Lattice integer(std::size_t n) { return Lattice(LatticeKind::IntegerZn, n, 1.0); }

  static Lattice scaled(std::size_t n, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("scaled lattice: scale must be positive");
    return Lattice(LatticeKind::ScaledZn, n, scale);
  }

  /// scale * (C + pZ^n).
  static Lattice construction_a(LinearCode code, double scale = 1.0) {
    if (!detail::is_prime(code.p)) throw std::invalid_argument("construction A: p must be prime");
    if (!(scale > 0.0)) throw std::invalid_argument("construction A: scale must be positive");
    const std::size_t n = code.length();
    if (n == 0) throw std::invalid_argument("construction A: empty code");
    Lattice lat(LatticeKind::ConstructionA, n, scale);
    lat.rref_ = code.generator;
    lat.pivots_ = row_reduce_mod_p(lat.rref_, code.p);
    lat.code_ = std::move(code);
    lat.build_basis();
    return lat;
  }

  LatticeKind kind() const { return kind_; }
  std::size_t dimension() const { return n_; }
  double scale() const { return scale_; }
  const std::optional<LinearCode>& code() const { return code_; }

  /// Generator matrix, basis vectors as columns (already scaled).
  Mat generator() const {
    if (kind_ != LatticeKind::ConstructionA) return Mat::Identity(dim(), dim()) * scale_;
    return basis_ * scale_;
  }

  /// Vol(V) = |det generator|.
  double volume() const {
    const double n = static_cast<double>(n_);
    if (kind_ != LatticeKind::ConstructionA) return std::pow(scale_, n);
    const auto k = static_cast<double>(code_->dimension());
    return std::pow(static_cast<double>(code_->p), n - k) * std::pow(scale_, n);
  }

  /// Q_V(s): the lattice point whose Voronoi cell contains s. Exact ties go to
  /// the lexicographically lowest point.
  Vec nearest_point(const Vec& s) const {
    check_dim(s);
    if (kind_ != LatticeKind::ConstructionA) {
      Vec out(s.size());
      for (Eigen::Index i = 0; i < s.size(); ++i) out(i) = detail::round_ties_down(s(i) / scale_) * scale_;
      return out;
    }
    return closest_by_enumeration(s);
  }

  /// [s] mod Lambda = s - Q_V(s).
  Vec mod(const Vec& s) const { return s - nearest_point(s); }

  /// Membership test to kLatticeTol (relative to scale).
  bool contains(const Vec& v, double tol = kLatticeTol) const {
    check_dim(v);
    Vec ints(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x = v(i) / scale_;
      ints(i) = std::round(x);
      if (std::abs(x - ints(i)) > tol * std::max(1.0, std::abs(x))) return false;
    }
    if (kind_ != LatticeKind::ConstructionA) return true;
    const std::int64_t p = code_->p;
    // The pivot entries fix the message; the rest must match its codeword.
    std::vector<std::int64_t> msg;
    msg.reserve(pivots_.size());
    for (auto c : pivots_) msg.push_back(detail::mod_p(static_cast<std::int64_t>(ints(c)), p));
    for (Eigen::Index j = 0; j < ints.size(); ++j) {
      std::int64_t acc = 0;
      for (std::size_t r = 0; r < msg.size(); ++r) acc += msg[r] * rref_(static_cast<Eigen::Index>(r), j);
      if (detail::mod_p(acc, p) != detail::mod_p(static_cast<std::int64_t>(ints(j)), p)) return false;
    }
    return true;
  }

  /// Codeword of the message given as k digits mod p (ConstructionA only),
  /// reduced to entries in [0, p).
  Vec codeword(const std::vector<std::int64_t>& message) const {
    if (kind_ != LatticeKind::ConstructionA) throw std::logic_error("codeword: not a construction A lattice");
    if (message.size() != code_->dimension()) throw std::invalid_argument("codeword: message length != k");
    Vec out(dim());
    for (Eigen::Index j = 0; j < out.size(); ++j) {
      std::int64_t acc = 0;
      for (std::size_t r = 0; r < message.size(); ++r)
        acc += message[r] * code_->generator(static_cast<Eigen::Index>(r), j);
      out(j) = static_cast<double>(detail::mod_p(acc, code_->p));
    }
    return out * scale_;
  }

  /// Uniform point of the fundamental parallelepiped of the generator.
  template <class Gen>
  Vec sample_parallelepiped(Gen& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec u(dim());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = unif(rng);
    if (kind_ != LatticeKind::ConstructionA) return (u.array() - 0.5).matrix() * scale_;
    return basis_ * u * scale_;
  }

  /// Upper bound on the covering radius from the Gram-Schmidt lengths of the
  /// generator: half the longest Gram-Schmidt vector times sqrt(n).
  double covering_radius_bound() const {
    if (kind_ != LatticeKind::ConstructionA) return 0.5 * scale_ * std::sqrt(static_cast<double>(n_));
    return 0.5 * r_.diagonal().cwiseAbs().maxCoeff() * std::sqrt(static_cast<double>(n_)) * scale_;
  }

  /// Calls visit(point) for every lattice point within `radius` of s, in
  /// enumeration order; visit returns false to stop early.
  template <class Visitor>
  void points_within(const Vec& s, double radius, Visitor&& visit) const {
    check_dim(s);
    ensure_enumerable();
    const Vec y = q_.transpose() * (s / scale_);
    const double r2 = (radius / scale_) * (radius / scale_);
    enumerate_sphere(r_, y, r2 * (1.0 + 1e-12), [&](const std::vector<std::int64_t>& u, double) {
      return visit(point_from_coeffs(u)) ? r2 * (1.0 + 1e-12) : -1.0;
    });
  }

  bool operator==(const Lattice& o) const {
    if (kind_ != o.kind_ || n_ != o.n_ || scale_ != o.scale_) return false;
    if (kind_ != LatticeKind::ConstructionA) return true;
    return code_->p == o.code_->p && rref_ == o.rref_;
  }

 private:
  Lattice(LatticeKind kind, std::size_t n, double scale) : kind_(kind), n_(n), scale_(scale) {
    if (n == 0) throw std::invalid_argument("lattice dimension must be positive");
    basis_ = q_ = r_ = Mat::Identity(dim(), dim());
  }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(n_); }

  void check_dim(const Vec& s) const {
    if (static_cast<std::size_t>(s.size()) != n_)
      throw std::invalid_argument("lattice: vector length " + std::to_string(s.size()) + " != dimension " +
                                  std::to_string(n_));
  }

  void ensure_enumerable() const {
    if (kind_ == LatticeKind::ConstructionA && n_ > kMaxEnumerationDim)
      throw EnumerationError("lattice: enumeration dimension " + std::to_string(n_) + " exceeds cap " +
                             std::to_string(kMaxEnumerationDim));
  }

  // Basis of C + pZ^n: the RREF rows (entries centered into (-p/2, p/2]) plus
  // p*e_j for every non-pivot column j.
  void build_basis() {
    const std::int64_t p = code_->p;
    basis_ = Mat::Zero(dim(), dim());
    Eigen::Index col = 0;
    for (Eigen::Index r = 0; r < rref_.rows(); ++r, ++col) {
      for (Eigen::Index j = 0; j < dim(); ++j) {
        std::int64_t v = rref_(r, j);
        if (2 * v > p) v -= p;
        basis_(j, col) = static_cast<double>(v);
      }
    }
    std::vector<bool> is_pivot(n_, false);
    for (auto c : pivots_) is_pivot[static_cast<std::size_t>(c)] = true;
    for (Eigen::Index j = 0; j < dim(); ++j)
      if (!is_pivot[static_cast<std::size_t>(j)]) basis_(j, col++) = static_cast<double>(p);
    Eigen::HouseholderQR<Mat> qr(basis_);
    q_ = qr.householderQ() * Mat::Identity(dim(), dim());
    r_ = qr.matrixQR().triangularView<Eigen::Upper>();
  }

  Vec point_from_coeffs(const std::vector<std::int64_t>& u) const {
    Vec coeffs(dim());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs(i) = static_cast<double>(u[static_cast<std::size_t>(i)]);
    Vec p = basis_ * coeffs;
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::round(p(i));  // integer lattice before scaling
    return p * scale_;
  }

  Vec closest_by_enumeration(const Vec& s) const {
    ensure_enumerable();
    const Vec target = s / scale_;
    const Vec y = q_.transpose() * target;
    double radius = covering_radius_bound() / scale_;
    for (int attempt = 0; attempt <= 3; ++attempt, radius *= 2.0) {
      double best = std::numeric_limits<double>::infinity();
      Vec best_point;
      const double limit2 = radius * radius;
      enumerate_sphere(r_, y, limit2, [&](const std::vector<std::int64_t>& u, double) {
        const Vec cand = point_from_coeffs(u) / scale_;
        const double d = (target - cand).squaredNorm();
        const double tie = kLatticeTol * std::max(1.0, d);
        if (d < best - tie) {
          best = d;
          best_point = cand;
        } else if (d <= best + tie && std::lexicographical_compare(cand.data(), cand.data() + cand.size(),
                                                                   best_point.data(),
                                                                   best_point.data() + best_point.size())) {
          best_point = cand;
        }
        return std::min(limit2, best + tie) * (1.0 + 1e-12);
      });
      if (best_point.size() == dim()) return best_point * scale_;
    }
    throw EnumerationError("nearest_point: enumeration radius exhausted without finding a lattice point");
  }

  LatticeKind kind_;
  std::size_t n_;
  double scale_;
  std::optional<LinearCode> code_;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> rref_;
  std::vector<Eigen::Index> pivots_;
  Mat basis_, q_, r_;
};

inline Vec nearest_point(const Lattice& lat, const Vec& s) { return lat.nearest_point(s); }
inline Vec mod_lattice(const Lattice& lat, const Vec& s) { return lat.mod(s); }

/// Second moment per dimension sigma^2 = (1/(n Vol)) * integral over V of ||s||^2.
/// Exact for Zn and scaled Zn; otherwise a Monte Carlo estimate from uniform
/// Voronoi samples (mod of parallelepiped-uniform draws).
inline McEstimate second_moment(const Lattice& lat, std::uint64_t samples = 200000, std::uint64_t seed = 1) {
  if (samples == 0) throw std::invalid_argument("second_moment: samples must be >= 1");
  if (lat.kind() != LatticeKind::ConstructionA) return McEstimate::exact(lat.scale() * lat.scale() / 12.0);
  const double n = static_cast<double>(lat.dimension());
  const Moments m = run_moments(1, samples, seed, [&](Rng& rng, std::span<double> out) {
    out[0] = lat.mod(lat.sample_parallelepiped(rng)).squaredNorm() / n;
  });
  return m.estimate(0);
}

/// G(Lambda) = sigma^2 / Vol^(2/n).
inline McEstimate normalized_second_moment(const Lattice& lat, std::uint64_t samples = 200000,
                                           std::uint64_t seed = 1) {
  const double vol = lat.volume();
  if (!(vol > 0.0) || !std::isfinite(vol)) throw std::invalid_argument("normalized_second_moment: singular generator");
  const double norm = std::pow(vol, 2.0 / static_cast<double>(lat.dimension()));
  const McEstimate s2 = second_moment(lat, samples, seed);
  return McEstimate::make(s2.mean / norm, s2.std_error / norm, s2.samples);
}

/// Coarse/fine pair Lambda (coarse) inside Lambda_1 (fine) with codebook
/// Lambda_1 intersected with V(coarse).
class NestedPair {
 public:
  NestedPair(Lattice coarse, Lattice fine) : coarse_(std::move(coarse)), fine_(std::move(fine)) {
    if (coarse_.dimension() != fine_.dimension()) throw std::invalid_argument("nested pair: dimension mismatch");
    const double ratio = coarse_.volume() / fine_.volume();
    if (ratio < 1.0 - 1e-12) throw std::invalid_argument("nested pair: fine lattice not nested (volume ratio < 1)");
    const Mat g = coarse_.generator();
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      if (!fine_.contains(g.col(c))) throw std::invalid_argument("nested pair: coarse basis vector not in fine lattice");
    rate_ = std::log2(std::max(ratio, 1.0)) / static_cast<double>(coarse_.dimension());
    codebook_size_ = static_cast<std::uint64_t>(std::llround(std::exp2(rate_ * static_cast<double>(dimension()))));
    classify();
  }

  const Lattice& coarse() const { return coarse_; }
  const Lattice& fine() const { return fine_; }
  std::size_t dimension() const { return coarse_.dimension(); }
  double rate_bits_per_dim() const { return rate_; }
  std::uint64_t codebook_size() const { return codebook_size_; }

  /// Fine-lattice point in V(coarse) for message_index in [0, codebook_size).
  Vec codeword(std::uint64_t message_index) const {
    if (message_index >= codebook_size_) throw std::out_of_range("codeword: message index out of range");
    const auto n = static_cast<Eigen::Index>(dimension());
    Vec raw = Vec::Zero(n);
    switch (layout_) {
      case Layout::Trivial:
        break;
      case Layout::CubicDigits: {
        std::uint64_t idx = message_index;
        for (Eigen::Index i = 0; i < n; ++i) {
          raw(i) = static_cast<double>(idx % radix_) * fine_.scale();
          idx /= radix_;
        }
        break;
      }
      case Layout::CodeDigits: {
        std::vector<std::int64_t> msg(fine_.code()->dimension());
        std::uint64_t idx = message_index;
        for (auto& m : msg) {
          m = static_cast<std::int64_t>(idx % radix_);
          idx /= radix_;
        }
        raw = fine_.codeword(msg);
        break;
      }
    }
    return coarse_.mod(raw);
  }

 private:
  enum class Layout { Trivial, CubicDigits, CodeDigits };

  void classify() {
    if (codebook_size_ == 1) {
      layout_ = Layout::Trivial;
      return;
    }
    if (coarse_.kind() == LatticeKind::ConstructionA)
      throw std::invalid_argument("nested pair: codebook enumeration needs a cubic coarse lattice");
    const double q = coarse_.scale() / fine_.scale();
    if (fine_.kind() != LatticeKind::ConstructionA) {
      radix_ = static_cast<std::uint64_t>(std::llround(q));
      layout_ = Layout::CubicDigits;
      return;
    }
    // coarse = scale*p*Z^n inside scale*(C + pZ^n): codewords are the p^k code cosets.
    if (std::abs(q - static_cast<double>(fine_.code()->p)) > 1e-9 * q)
      throw std::invalid_argument("nested pair: construction A fine lattice needs coarse = p * fine scale * Z^n");
    radix_ = static_cast<std::uint64_t>(fine_.code()->p);
    layout_ = Layout::CodeDigits;
  }

  Lattice coarse_, fine_;
  double rate_ = 0.0;
  std::uint64_t codebook_size_ = 1;
  Layout layout_ = Layout::Trivial;
  std::uint64_t radix_ = 1;
};

/// R = (1/n) log2(Vol(V_coarse) / Vol(V_fine)).
inline double nesting_rate(const NestedPair& pair) { return pair.rate_bits_per_dim(); }

/// Dither uniform over the coarse Voronoi region.
template <class Gen>
Vec sample_dither(const NestedPair& pair, Gen& rng) {
  return pair.coarse().mod(pair.coarse().sample_parallelepiped(rng));
}

/// Cubic pair: coarse sqrt(12 P) Z^n, fine coarse/q, rate log2(q) bits/dim.
inline NestedPair cubic_pair(std::size_t n, std::uint64_t q, double second_moment_target) {
  if (q == 0) throw std::invalid_argument("cubic_pair: q must be >= 1");
  const double side = std::sqrt(12.0 * second_moment_target);
  return NestedPair(Lattice::scaled(n, side), Lattice::scaled(n, side / static_cast<double>(q)));
}

/// Construction-A pair: fine beta(C + pZ^n) with a seeded systematic [n, k]
/// code, coarse beta p Z^n with second moment `second_moment_target`.
inline NestedPair construction_a_pair(std::size_t n, std::size_t k, std::int64_t p, double second_moment_target,
                                      std::uint64_t code_seed = 1) {
  const double beta = std::sqrt(12.0 * second_moment_target) / static_cast<double>(p);
  LinearCode code = random_systematic_code(n, k, p, code_seed);
  return NestedPair(Lattice::scaled(n, beta * static_cast<double>(p)), Lattice::construction_a(std::move(code), beta));
}

/// Parses a plain-text lattice block:
///
///   kind = construction_a   # or integer, scaled
///   n = 4
///   scale = 1.0
///   p = 5
///   row = 1 0 2 3
///   row = 0 1 4 1
inline Lattice parse_lattice_config(std::string_view text) {
  std::string kind;
  std::optional<std::size_t> n;
  double scale = 1.0;
  std::optional<std::int64_t> p;
  std::vector<std::vector<std::int64_t>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw std::invalid_argument("lattice config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "kind") {
        kind = value;
      } else if (key == "n") {
        n = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "scale") {
        scale = std::stod(value);
      } else if (key == "p") {
        p = std::stoll(value);
      } else if (key == "row") {
        std::istringstream rs(value);
        std::vector<std::int64_t> row;
        std::int64_t v;
        while (rs >> v) row.push_back(v);
        if (!rs.eof()) throw std::invalid_argument("non-integer entry");
        rows.push_back(std::move(row));
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("lattice config line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("lattice config line " + std::to_string(lineno) + ": value out of range");
    }
  }
  if (!n || *n == 0) throw std::invalid_argument("lattice config: missing or zero n");
  if (kind == "integer") return Lattice::integer(*n);
  if (kind == "scaled") return Lattice::scaled(*n, scale);
  if (kind == "construction_a") {
    if (!p) throw std::invalid_argument("lattice config: construction_a needs p");
    if (rows.empty()) throw std::invalid_argument("lattice config: construction_a needs at least one row");
    LinearCode code;
    code.p = *p;
    code.generator.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(*n));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != *n) throw std::invalid_argument("lattice config: row length != n");
      for (std::size_t c = 0; c < *n; ++c)
        code.generator(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return Lattice::construction_a(std::move(code), scale);
  }
  throw std::invalid_argument("lattice config: unknown kind '" + kind + "'");
}

}  // namespace latfade
