#pragma once

#include "ipll/math.hpp"
#include "ipll/prototypes.hpp"

#include <utility>
#include <vector>

namespace ipll {

/// Thrown by fit_gmm_1d when the input has fewer than two distinct values;
/// the trainer falls back to a mean-distance threshold.
struct GmmDegenerateInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 1-D two-component Gaussian mixture; component 0 has the smaller mean.
struct Gmm1D {
  double mean[2] = {0.0, 0.0};
  double var[2] = {1.0, 1.0};
  double weight[2] = {0.5, 0.5};
  int iterations = 0;
  std::vector<double> loglik_trace;  // one entry per EM iteration
};

struct SeparationConfig {
  double alpha = 0.8;        // old-membership posterior threshold
  double beta_start = 0.8;   // pseudo-label momentum, ramped linearly
  double beta_end = 0.6;
  double em_tol = 1e-6;
  int em_max_iters = 100;
  double variance_floor = 1e-6;
};

/// Distances e_i = min over old candidates of ||phi(x_i) - mu_j||_2 for
/// samples whose candidate set meets the old label space.  Returns pairs
/// (row index, e_i); rows without measurable old candidates are absent.
std::vector<std::pair<int, double>> distance_set(
    const std::vector<std::vector<int>>& candidates,
    const Eigen::Ref<const Mat>& features, const PrototypeBank& bank,
    const std::vector<int>& old_space);

/// EM fit from a deterministic start: means at the 10th/90th percentiles,
/// both variances at the sample variance, equal weights.
Gmm1D fit_gmm_1d(const std::vector<double>& values, const SeparationConfig& config);

/// Posterior of the smaller-mean component at e, computed in log space.
double posterior_old(const Gmm1D& gmm, double e);

/// is_old[i] = true iff sample i appears in `posteriors` with w > alpha.
/// `posteriors` holds (index, w) pairs from the distance set.
std::vector<bool> separate(int num_samples,
                           const std::vector<std::pair<int, double>>& posteriors,
                           double alpha);

/// Candidate re-allocation.  Old membership keeps the nearest-prototype old
/// class plus all new-class candidates; new membership keeps new-class
/// candidates only.  An empty result falls back to the single
/// nearest-prototype class among the original candidates.
std::vector<int> reallocate(const std::vector<int>& candidates,
                            bool is_old,
                            const PrototypeBank& bank,
                            const Eigen::Ref<const Vec>& feature,
                            const std::vector<int>& new_space,
                            const std::vector<int>& old_space);

/// Uniform pseudo-label over the re-allocated candidate set.
Vec init_pseudo(const std::vector<int>& candidates, int num_classes);

/// p <- beta*p + (1-beta)*onehot(argmax_{j in cand} logits_j); renormalizes
/// only if the sum drifted beyond 1e-9.
void update_pseudo(Vec& p, const Eigen::Ref<const Vec>& logits,
                   const std::vector<int>& candidates, double beta);

/// Momentum blend toward an externally chosen one-hot target.
void update_pseudo(Vec& p, int z, double beta);

/// PRODEN-style label: the model output masked to the candidate set and
/// renormalized.  The MP ablation uses this in place of the separation and
/// momentum machinery.
Vec pseudo_from_model_output(const Eigen::Ref<const Vec>& probs,
                             const std::vector<int>& candidates);

/// Linear ramp from beta_start (epoch 0) to beta_end (last epoch).
double beta_at(int epoch, int total_epochs, double beta_start, double beta_end);

}  // namespace ipll
