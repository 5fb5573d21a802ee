#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace latmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sorted list of 0-based indices (constraint rows, literals, ...).
using IndexList = std::vector<int>;

/// Thrown when an input violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative numerical routine fails to converge or
/// reaches an internally inconsistent state.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned hyperbox [lo, hi].
struct Box {
  Vector lo;
  Vector hi;

  Box() = default;
  Box(Vector lo_, Vector hi_);

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vector& x, double tol = 0.0) const;
  Vector width() const { return hi - lo; }
  /// Reflects coordinates that left the box back inside (single bounce).
  Vector reflect_inside(const Vector& x) const;
};

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so parallel workers and serial runs agree.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, no caching so the stream stays stateless per draw pair).
  double normal();
  Vector uniform_in(const Box& box);
  Vector unit_sphere(int dim);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Worker count from LATMPC_THREADS, defaulting to hardware concurrency.
int worker_count();

/// Runs fn(i) for i in [0, n) on worker_count() threads. fn must only
/// write to slot i of caller-owned storage.
template <typename Fn>
void parallel_for(int n, Fn&& fn);

}  // namespace latmpc

#include "latmpc/detail/parallel.hpp"
