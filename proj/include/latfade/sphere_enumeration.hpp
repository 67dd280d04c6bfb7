#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace latfade {

/// Raised when a bounded enumeration cannot certify its answer.
class EnumerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schnorr-Euchner depth-first enumeration of integer vectors u with
/// ||y - R u||^2 <= radius2, R upper triangular with nonzero diagonal.
///
/// The visitor is called as visit(u, dist2) for each leaf inside the current
/// radius and returns the radius2 to continue with; returning a negative value
/// stops the search. Children are visited in order of nondecreasing distance
/// from their projected center, so shrinking the radius prunes correctly.
template <class Visitor>
void enumerate_sphere(const Eigen::MatrixXd& R, const Eigen::VectorXd& y, double radius2, Visitor&& visit) {
  const Eigen::Index n = R.rows();
  if (R.cols() != n || y.size() != n) throw std::invalid_argument("enumerate_sphere: dimension mismatch");
  if (n == 0) {
    visit(std::vector<std::int64_t>{}, 0.0);
    return;
  }
  std::vector<std::int64_t> u(static_cast<std::size_t>(n), 0);
  bool stopped = false;

  auto recurse = [&](auto&& self, Eigen::Index k, double partial) -> void {
    double acc = y(k);
    for (Eigen::Index j = k + 1; j < n; ++j) acc -= R(k, j) * static_cast<double>(u[static_cast<std::size_t>(j)]);
    const double rkk = R(k, k);
    const double center = acc / rkk;
    const double w = rkk * rkk;
    const auto base = static_cast<std::int64_t>(std::llround(center));
    const std::int64_t step = (center >= static_cast<double>(base)) ? 1 : -1;
    // Zig-zag base, base+step, base-step, base+2step, ... has nondecreasing
    // |cand - center|, so the first candidate outside the radius ends the level.
    for (std::int64_t m = 0;; ++m) {
      const std::int64_t offset = (m % 2 == 1) ? step * ((m + 1) / 2) : -step * (m / 2);
      const std::int64_t cand = base + offset;
      const double diff = static_cast<double>(cand) - center;
      const double d = partial + w * diff * diff;
      if (d > radius2) break;
      u[static_cast<std::size_t>(k)] = cand;
      if (k == 0) {
        radius2 = visit(u, d);
        if (radius2 < 0) {
          stopped = true;
          return;
        }
      } else {
        self(self, k - 1, d);
        if (stopped) return;
      }
    }
  };
  recurse(recurse, n - 1, 0.0);
}

}  // namespace latfade
