#pragma once

#include "ipll/math.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ipll {

enum class Activation { Identity, Tanh, Relu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct LossWeights {
  double ce = 1.0;
  double kd = 1.0;
  double cr = 1.0;
};

struct Gradients {
  Mat w1, w2;
  Vec b1, b2;
};

/// Batch forward cache: rows are samples.
struct Forward {
  Mat input;     // N x d, standardized input actually fed to the affine layer
  Mat pre;       // N x h, encoder pre-activation
  Mat features;  // N x h, phi(x)
  Mat logits;    // N x C
  Mat probs;     // N x C, row softmax
};

struct BatchLosses {
  double ce = 0.0;
  double kd = 0.0;
  double cr = 0.0;
  double weighted(const LossWeights& w) const {
    return w.ce * ce + w.kd * kd + w.cr * cr;
  }
};

/// Two-layer classifier: a fixed input standardization, encoder phi
/// (affine d -> h plus an elementwise nonlinearity; Identity gives a
/// linear encoder) and a growable linear head h -> |Y_t|.  Momentum
/// buffers live next to the parameters.  The standardization is constant
/// data-normalization state, not a trained layer.
class Model {
 public:
  Model() = default;
  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  Model(int input_dim, int hidden_dim, int num_classes, Activation act, Rng& rng);

  int input_dim() const { return static_cast<int>(w1_.cols()); }
  int hidden_dim() const { return static_cast<int>(w1_.rows()); }
  int num_classes() const { return static_cast<int>(w2_.rows()); }
  Activation activation() const { return act_; }

  /// Constant input normalization applied before the affine layer:
  /// x -> (x - mean) / scale.
  void set_input_standardization(const Vec& mean, double scale);
  const Vec& input_mean() const { return input_mean_; }
  double input_scale() const { return input_scale_; }

  /// Adds head rows for new classes; existing rows are untouched and new
  /// rows draw from the construction-time init distribution.
  void grow_head(int new_num_classes, Rng& rng);

  Forward forward(const Eigen::Ref<const Mat>& x) const;
  /// Single-sample convenience: (feature, logits, probs).
  void forward_one(const Eigen::Ref<const Vec>& x, Vec& feature, Vec& logits,
                   Vec& probs) const;
  Vec encode(const Eigen::Ref<const Vec>& x) const;
  Mat encode_batch(const Eigen::Ref<const Mat>& x) const;

  /// v <- momentum*v + g;  theta <- theta - lr*v.
  void sgd_step(const Gradients& g, double lr, double momentum);

  Gradients zero_gradients() const;

  Mat& w1() { return w1_; }
  Vec& b1() { return b1_; }
  Mat& w2() { return w2_; }
  Vec& b2() { return b2_; }
  const Mat& w1() const { return w1_; }
  const Vec& b1() const { return b1_; }
  const Mat& w2() const { return w2_; }
  const Vec& b2() const { return b2_; }
  Mat& vel_w1() { return vw1_; }
  Vec& vel_b1() { return vb1_; }
  Mat& vel_w2() { return vw2_; }
  Vec& vel_b2() { return vb2_; }
  const Mat& vel_w1() const { return vw1_; }
  const Vec& vel_b1() const { return vb1_; }
  const Mat& vel_w2() const { return vw2_; }
  const Vec& vel_b2() const { return vb2_; }

  /// Flat list of parameter references, used by the finite-difference tests.
  std::vector<double*> parameters();

 private:
  Mat standardize(const Eigen::Ref<const Mat>& x) const;

  Mat w1_, w2_;
  Vec b1_, b2_;
  Mat vw1_, vw2_;
  Vec vb1_, vb2_;
  Vec input_mean_;
  double input_scale_ = 1.0;
  Activation act_ = Activation::Tanh;
};

/// -(1/N) sum_i sum_j p_ij log f_ij with the log floored at 1e-12.
double loss_ce(const Eigen::Ref<const Mat>& probs, const Eigen::Ref<const Mat>& pseudo);

/// Distillation cross-entropy between old-class distributions (both already
/// renormalized over the old label space).
double loss_kd(const Eigen::Ref<const Mat>& cur_old_probs,
               const Eigen::Ref<const Mat>& snap_old_probs);

/// Consistency term: pseudo-labels from the weak view scored against the
/// strong view's probabilities.  Same expression as loss_ce.
double loss_cr(const Eigen::Ref<const Mat>& pseudo,
               const Eigen::Ref<const Mat>& strong_probs);

/// x plus isotropic Gaussian noise of stddev sigma.
Vec augment(const Eigen::Ref<const Vec>& x, double sigma, Rng& rng);
Mat augment_batch(const Eigen::Ref<const Mat>& x, double sigma, Rng& rng);

struct TotalLossInputs {
  Eigen::Ref<const Mat> weak;    // N x d, view for the ce and kd terms
  Eigen::Ref<const Mat> strong;  // N x d, view for the cr term
  Eigen::Ref<const Mat> pseudo;  // N x C, unit-sum rows
  const Model* old_model = nullptr;  // nullptr drops the kd term (task 1)
  double kd_temperature = 1.0;
};

/// Loss values and analytic parameter gradients of
/// w_ce*L_ce + w_kd*L_kd + w_cr*L_cr.
BatchLosses total_loss_grad(const Model& model, const TotalLossInputs& in,
                            const LossWeights& weights, Gradients& out);

/// Loss values only, on the same inputs (used by the finite-difference
/// oracle and the probe-loss bookkeeping).
BatchLosses total_loss(const Model& model, const TotalLossInputs& in);

}  // namespace ipll
