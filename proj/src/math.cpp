#include "ipll/math.hpp"

#include <algorithm>
#include <cmath>

namespace ipll {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

Vec Rng::normal_vec(int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

Rng Rng::derive(std::string_view purpose) const {
  return Rng(mix(seed_ ^ fnv1a64(purpose)));
}

void assert_finite(const Eigen::Ref<const Vec>& v, const char* what) {
  if (!v.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

Vec softmax(const Eigen::Ref<const Vec>& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty input");
  assert_finite(logits, "softmax");
  Vec shifted = logits.array() - logits.maxCoeff();
  Vec e = shifted.array().exp();
  return e / e.sum();
}

Mat softmax_rows(const Eigen::Ref<const Mat>& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    out.row(i) = softmax(logits.row(i).transpose()).transpose();
  return out;
}

int argmax_restricted(const Eigen::Ref<const Vec>& values,
                      const std::vector<int>& allowed) {
  if (allowed.empty())
    throw std::invalid_argument("argmax_restricted: empty allowed set");
  int best = -1;
  for (int j : allowed) {
    if (j < 0 || j >= values.size())
      throw std::invalid_argument("argmax_restricted: index out of range");
    if (best < 0 || values[j] > values[best] ||
        (values[j] == values[best] && j < best)) {
      best = j;
    }
  }
  return best;
}

int argmin_restricted(const Eigen::Ref<const Vec>& values,
                      const std::vector<int>& allowed) {
  if (allowed.empty())
    throw std::invalid_argument("argmin_restricted: empty allowed set");
  int best = -1;
  for (int j : allowed) {
    if (j < 0 || j >= values.size())
      throw std::invalid_argument("argmin_restricted: index out of range");
    if (best < 0 || values[j] < values[best] ||
        (values[j] == values[best] && j < best)) {
      best = j;
    }
  }
  return best;
}

bool set_contains(const std::vector<int>& sorted, int v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::vector<int> set_intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

}  // namespace ipll
