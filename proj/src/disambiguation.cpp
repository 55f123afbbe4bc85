#include "ipll/disambiguation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipll {

namespace {

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double interpolated_percentile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

std::vector<std::pair<int, double>> distance_set(
    const std::vector<std::vector<int>>& candidates,
    const Eigen::Ref<const Mat>& features, const PrototypeBank& bank,
    const std::vector<int>& old_space) {
  std::vector<std::pair<int, double>> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j : set_intersect(candidates[i], old_space)) {
      if (j >= bank.num_classes() || !bank.initialized[j]) continue;
      best = std::min(best, (features.row(i) - bank.prototypes.row(j)).norm());
    }
    if (std::isfinite(best)) out.emplace_back(static_cast<int>(i), best);
  }
  return out;
}

Gmm1D fit_gmm_1d(const std::vector<double>& values, const SeparationConfig& config) {
  const std::size_t n = values.size();
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  if (n < 2 || sorted.front() == sorted.back())
    throw GmmDegenerateInput("fit_gmm_1d: need at least 2 distinct values");

  Gmm1D g;
  g.mean[0] = interpolated_percentile(sorted, 0.10);
  g.mean[1] = interpolated_percentile(sorted, 0.90);
  if (g.mean[0] == g.mean[1]) {
    g.mean[0] = sorted.front();
    g.mean[1] = sorted.back();
  }
  double mean_all = 0.0;
  for (double v : values) mean_all += v;
  mean_all /= static_cast<double>(n);
  double var_all = 0.0;
  for (double v : values) var_all += (v - mean_all) * (v - mean_all);
  var_all = std::max(var_all / static_cast<double>(n), config.variance_floor);
  g.var[0] = g.var[1] = var_all;
  g.weight[0] = g.weight[1] = 0.5;

  std::vector<double> r0(n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.em_max_iters; ++it) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a0 = std::log(g.weight[0]) + log_normal_pdf(values[i], g.mean[0], g.var[0]);
      const double a1 = std::log(g.weight[1]) + log_normal_pdf(values[i], g.mean[1], g.var[1]);
      const double lse = log_sum_exp(a0, a1);
      r0[i] = std::exp(a0 - lse);
      ll += lse;
    }
    g.loglik_trace.push_back(ll);
    g.iterations = it + 1;
    if (it > 0 && ll - prev_ll < config.em_tol) break;
    prev_ll = ll;

    double s0 = 0.0, s1 = 0.0, m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s0 += r0[i];
      s1 += 1.0 - r0[i];
      m0 += r0[i] * values[i];
      m1 += (1.0 - r0[i]) * values[i];
    }
    if (s0 <= 0.0 || s1 <= 0.0) break;  // one component emptied out
    g.mean[0] = m0 / s0;
    g.mean[1] = m1 / s1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += r0[i] * (values[i] - g.mean[0]) * (values[i] - g.mean[0]);
      v1 += (1.0 - r0[i]) * (values[i] - g.mean[1]) * (values[i] - g.mean[1]);
    }
    g.var[0] = std::max(v0 / s0, config.variance_floor);
    g.var[1] = std::max(v1 / s1, config.variance_floor);
    g.weight[0] = s0 / static_cast<double>(n);
    g.weight[1] = s1 / static_cast<double>(n);
  }

  if (g.mean[0] > g.mean[1]) {
    std::swap(g.mean[0], g.mean[1]);
    std::swap(g.var[0], g.var[1]);
    std::swap(g.weight[0], g.weight[1]);
  }
  return g;
}

double posterior_old(const Gmm1D& gmm, double e) {
  const double a0 = std::log(gmm.weight[0]) + log_normal_pdf(e, gmm.mean[0], gmm.var[0]);
  const double a1 = std::log(gmm.weight[1]) + log_normal_pdf(e, gmm.mean[1], gmm.var[1]);
  return std::exp(a0 - log_sum_exp(a0, a1));
}

std::vector<bool> separate(int num_samples,
                           const std::vector<std::pair<int, double>>& posteriors,
                           double alpha) {
  std::vector<bool> is_old(num_samples, false);
  for (const auto& [idx, w] : posteriors) is_old[idx] = w > alpha;
  return is_old;
}

std::vector<int> reallocate(const std::vector<int>& candidates, bool is_old,
                            const PrototypeBank& bank,
                            const Eigen::Ref<const Vec>& feature,
                            const std::vector<int>& new_space,
                            const std::vector<int>& old_space) {
  auto nearest_prototype_class = [&](const std::vector<int>& among) -> int {
    std::vector<int> usable;
    for (int j : among)
      if (j < bank.num_classes() && bank.initialized[j]) usable.push_back(j);
    if (usable.empty()) return -1;
    Vec dists(bank.num_classes());
    dists.setConstant(std::numeric_limits<double>::infinity());
    for (int j : usable)
      dists[j] = (bank.prototypes.row(j).transpose() - feature).norm();
    return argmin_restricted(dists, usable);
  };

  std::vector<int> result = set_intersect(candidates, new_space);
  if (is_old) {
    const int c_star = nearest_prototype_class(set_intersect(candidates, old_space));
    if (c_star >= 0 && !set_contains(result, c_star)) {
      result.insert(std::lower_bound(result.begin(), result.end(), c_star), c_star);
    }
  }
  if (result.empty()) {
    const int c = nearest_prototype_class(candidates);
    if (c >= 0) return {c};
    return candidates;  // no usable prototype anywhere; keep the set intact
  }
  return result;
}

Vec init_pseudo(const std::vector<int>& candidates, int num_classes) {
  if (candidates.empty()) throw std::invalid_argument("init_pseudo: empty candidate set");
  Vec p = Vec::Zero(num_classes);
  const double u = 1.0 / static_cast<double>(candidates.size());
  for (int j : candidates) {
    if (j < 0 || j >= num_classes)
      throw std::invalid_argument("init_pseudo: candidate out of range");
    p[j] = u;
  }
  return p;
}

void update_pseudo(Vec& p, const Eigen::Ref<const Vec>& logits,
                   const std::vector<int>& candidates, double beta) {
  update_pseudo(p, argmax_restricted(logits, candidates), beta);
}

void update_pseudo(Vec& p, int z, double beta) {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("update_pseudo: beta in [0,1]");
  if (z < 0 || z >= p.size()) throw std::invalid_argument("update_pseudo: target out of range");
  p *= beta;
  p[z] += 1.0 - beta;
  const double sum = p.sum();
  if (std::abs(sum - 1.0) > 1e-9) p /= sum;
}

Vec pseudo_from_model_output(const Eigen::Ref<const Vec>& probs,
                             const std::vector<int>& candidates) {
  if (candidates.empty())
    throw std::invalid_argument("pseudo_from_model_output: empty candidate set");
  Vec p = Vec::Zero(probs.size());
  double sum = 0.0;
  for (int j : candidates) sum += probs[j];
  for (int j : candidates) p[j] = probs[j] / sum;
  return p;
}

double beta_at(int epoch, int total_epochs, double beta_start, double beta_end) {
  if (total_epochs < 1) throw std::invalid_argument("beta_at: total_epochs >= 1");
  if (total_epochs == 1) return beta_start;
  const double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return beta_start + (beta_end - beta_start) * frac;
}

}  // namespace ipll
