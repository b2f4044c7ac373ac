#include "gebo/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gebo {

std::uint64_t mix_u64(std::uint64_t v) {
  v += 0x9e3779b97f4a7c15ULL;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  return v ^ (v >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return mix_u64(base ^ mix_u64(tag));
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  // FNV-1a over the tag bytes, then mixed with the base.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(base, h);
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t v = state_;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  return v ^ (v >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; u1 bounded away from 0 so the log is finite.
  double u1 = uniform();
  while (u1 <= 0x1.0p-60) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  return next_u64() % n;
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(
        uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

Eigen::MatrixXd latin_hypercube(Rng& rng, int n, const Eigen::VectorXd& lb,
                                const Eigen::VectorXd& ub) {
  if (n < 1) throw std::invalid_argument("latin_hypercube: n must be >= 1");
  if (lb.size() != ub.size())
    throw std::invalid_argument("latin_hypercube: bound size mismatch");
  const auto dim = lb.size();
  Eigen::MatrixXd samples(n, dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const std::vector<int> strata = rng.permutation(n);
    for (int i = 0; i < n; ++i) {
      const double frac = (strata[static_cast<std::size_t>(i)] + rng.uniform()) / n;
      samples(i, d) = lb[d] + (ub[d] - lb[d]) * frac;
    }
  }
  return samples;
}

}  // namespace gebo
