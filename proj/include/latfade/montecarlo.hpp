#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "latfade/random.hpp"

namespace latfade {

/// Monte Carlo mean with its standard error and 95% half-width
/// (ci95_halfwidth = 1.96 * std_error).
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
  double ci95_halfwidth = 0.0;

  static McEstimate make(double mean, double std_error, std::uint64_t samples) {
    return {mean, std_error, samples, 1.96 * std_error};
  }
  /// Exact value, no sampling noise.
  static McEstimate exact(double value) { return {value, 0.0, 0, 0.0}; }
};

/// Running mean and co-moment matrix of a vector-valued sample stream.
/// Merging follows Chan et al., so partial accumulators can be combined in a
/// fixed order.
class Moments {
 public:
  explicit Moments(std::size_t dim = 0) : mean_(Eigen::VectorXd::Zero(dim)), comoment_(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(std::span<const double> x) {
    const auto d = mean_.size();
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    scratch_.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      scratch_(i) = x[static_cast<std::size_t>(i)] - mean_(i);
      mean_(i) += scratch_(i) * inv;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      const double post = x[static_cast<std::size_t>(j)] - mean_(j);
      for (Eigen::Index i = 0; i < d; ++i) comoment_(i, j) += scratch_(i) * post;
    }
  }

  void merge(const Moments& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const Eigen::VectorXd delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    comoment_ += other.comoment_ + delta * delta.transpose() * (na * nb / n);
    count_ += other.count_;
  }

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  std::uint64_t count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  double mean(std::size_t i) const { return mean_(static_cast<Eigen::Index>(i)); }

  /// Unbiased sample covariance.
  Eigen::MatrixXd covariance() const {
    if (count_ < 2) return Eigen::MatrixXd::Zero(mean_.size(), mean_.size());
    return comoment_ / static_cast<double>(count_ - 1);
  }

  McEstimate estimate(std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(i);
    return McEstimate::make(mean_(k), std_error_of(covariance()(k, k)), count_);
  }

  /// Delta-method estimate for a smooth functional g(mean) whose value and
  /// gradient at the sample mean are supplied by the caller.
  McEstimate delta(double value, const Eigen::VectorXd& gradient) const {
    const double var = gradient.dot(covariance() * gradient);
    return McEstimate::make(value, std_error_of(var), count_);
  }

 private:
  double std_error_of(double variance) const {
    if (count_ == 0) return 0.0;
    return std::sqrt(std::max(variance, 0.0) / static_cast<double>(count_));
  }

  std::uint64_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd comoment_;
  Eigen::VectorXd scratch_;
};

inline constexpr std::uint64_t kChunkSize = 4096;

/// Runs body(i) for i in [0, count) on up to `workers` threads. Work is handed
/// out by an atomic counter; callers write results into per-index slots, so
/// output never depends on scheduling.
template <class Body>
void parallel_for(std::uint64_t count, Body&& body, unsigned workers = worker_count()) {
  if (count == 0) return;
  workers = static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, workers), count));
  if (workers == 1) {
    for (std::uint64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::uint64_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Map-reduce of `samples` draws of a vector-valued sampler
/// sampler(Rng&, std::span<double> out). Samples are grouped into fixed-size
/// chunks with one stream per chunk and merged in chunk order, so the result is
/// bit-identical for every worker count.
template <class Sampler>
Moments run_moments(std::size_t dim, std::uint64_t samples, std::uint64_t seed, const Sampler& sampler,
                    unsigned workers = worker_count()) {
  if (samples == 0) throw std::invalid_argument("run_moments: samples must be >= 1");
  const std::uint64_t chunks = (samples + kChunkSize - 1) / kChunkSize;
  std::vector<Moments> partial(chunks, Moments(dim));
  parallel_for(
      chunks,
      [&](std::uint64_t c) {
        Rng rng = make_stream(seed, c);
        std::vector<double> buf(dim);
        const std::uint64_t begin = c * kChunkSize;
        const std::uint64_t end = std::min(samples, begin + kChunkSize);
        Moments& acc = partial[c];
        for (std::uint64_t s = begin; s < end; ++s) {
          sampler(rng, std::span<double>(buf));
          acc.add(buf);
        }
      },
      workers);
  Moments total(dim);
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace latfade
