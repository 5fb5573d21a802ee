#include "latmpc/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

namespace latmpc {

Box::Box(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw InvalidInput("box bounds differ in dimension");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i])) throw InvalidInput("box lower bound exceeds upper bound");
  }
}

bool Box::contains(const Vector& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  }
  return true;
}

Vector Box::reflect_inside(const Vector& x) const {
  Vector y = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] > hi[i]) y[i] = 2.0 * hi[i] - y[i];
    if (y[i] < lo[i]) y[i] = 2.0 * lo[i] - y[i];
    y[i] = std::clamp(y[i], lo[i], hi[i]);
  }
  return y;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t key = mix64(seed_ ^ mix64(stream_ + 0x632be59bd9b4e019ULL));
  return mix64(key + mix64(counter_++));
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector CounterRng::uniform_in(const Box& box) {
  Vector x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x[i] = uniform(box.lo[i], box.hi[i]);
  return x;
}

Vector CounterRng::unit_sphere(int dim) {
  Vector d(dim);
  double norm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) d[i] = normal();
    norm = d.norm();
  } while (norm < 1e-12);
  return d / norm;
}

int worker_count() {
  if (const char* env = std::getenv("LATMPC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace latmpc
