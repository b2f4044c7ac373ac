#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace gebo {

// Deterministic random stream with pinned draw algorithms. The standard
// distributions are implementation-defined, so uniform/normal/shuffle are
// spelled out here to keep experiment reruns byte-identical.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (no cached spare).
  double normal();

  // Uniform integer on [0, n), n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  std::vector<int> permutation(int n);

 private:
  std::uint64_t state_;
};

// splitmix64 finalizer; used both inside Rng and for seed derivation.
std::uint64_t mix_u64(std::uint64_t v);

// Combine a base seed with stream tags (run id, iteration, purpose).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

// Latin hypercube sample: n rows in [lb, ub], one point per stratum along
// every coordinate, random pairing across coordinates.
Eigen::MatrixXd latin_hypercube(Rng& rng, int n, const Eigen::VectorXd& lb,
                                const Eigen::VectorXd& ub);

}  // namespace gebo
