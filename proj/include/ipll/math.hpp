#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ipll {

using Scalar = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Counter-based pseudo-random generator (SplitMix64).
///
/// The state is a Weyl counter advanced by the golden-gamma constant
/// 0x9E3779B97F4A7C15; each output is a fixed 64-bit finalizer of the
/// counter.  The sequence depends only on the seed, so equal seeds give
/// equal draw sequences on every platform.  `derive` produces an
/// independent child generator from the original seed and a purpose
/// string (FNV-1a hash mixed through the same finalizer), which is how
/// one root seed controls every stochastic stage of a run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal via Box-Muller (pairs are generated together and
  /// the spare is cached).
  double normal();

  Vec normal_vec(int dim);

  /// Child generator for an independent purpose; a function of the
  /// original seed only, not of how many draws were consumed.
  Rng derive(std::string_view purpose) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

void assert_finite(const Eigen::Ref<const Vec>& v, const char* what);

/// Euclidean distance between equal-dimension vectors.
template <typename A, typename B>
Scalar l2_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("l2_distance: dimension mismatch");
  return (a - b).norm();
}

/// Numerically stable softmax (max-subtraction).
Vec softmax(const Eigen::Ref<const Vec>& logits);

/// Row-wise softmax of a batch of logit rows.
Mat softmax_rows(const Eigen::Ref<const Mat>& logits);

/// Index in `allowed` maximizing `values`; ties break to the smallest index.
int argmax_restricted(const Eigen::Ref<const Vec>& values,
                      const std::vector<int>& allowed);

/// Index in `allowed` minimizing `values`; ties break to the smallest index.
int argmin_restricted(const Eigen::Ref<const Vec>& values,
                      const std::vector<int>& allowed);

// Sorted-int-set helpers used for candidate label sets.
bool set_contains(const std::vector<int>& sorted, int v);
std::vector<int> set_intersect(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace ipll
