#include "ipll/model.hpp"

#include <cmath>

namespace ipll {

namespace {

constexpr double kLogFloor = 1e-12;

Mat safe_log(const Eigen::Ref<const Mat>& p) {
  return p.array().max(kLogFloor).log();
}

void check_unit_rows(const Eigen::Ref<const Mat>& pseudo, const char* what) {
  for (Eigen::Index i = 0; i < pseudo.rows(); ++i) {
    if (std::abs(pseudo.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument(std::string(what) + ": pseudo row must sum to 1");
  }
}

Mat activation_apply(Activation act, const Eigen::Ref<const Mat>& pre) {
  switch (act) {
    case Activation::Identity: return pre;
    case Activation::Tanh: return pre.array().tanh();
    case Activation::Relu: return pre.array().max(0.0);
  }
  throw std::logic_error("unknown activation");
}

// Derivative expressed through pre-activation and activation values.
Mat activation_grad(Activation act, const Eigen::Ref<const Mat>& pre,
                    const Eigen::Ref<const Mat>& val) {
  switch (act) {
    case Activation::Identity: return Mat::Ones(pre.rows(), pre.cols());
    case Activation::Tanh: return 1.0 - val.array().square();
    case Activation::Relu: return (pre.array() > 0.0).cast<double>();
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Model::Model(int input_dim, int hidden_dim, int num_classes, Activation act,
             Rng& rng)
    : act_(act) {
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 1)
    throw std::invalid_argument("model: dimensions must be positive");
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  w1_.resize(hidden_dim, input_dim);
  for (int i = 0; i < hidden_dim; ++i)
    for (int j = 0; j < input_dim; ++j) w1_(i, j) = rng.uniform(-s1, s1);
  w2_.resize(num_classes, hidden_dim);
  for (int i = 0; i < num_classes; ++i)
    for (int j = 0; j < hidden_dim; ++j) w2_(i, j) = rng.uniform(-s2, s2);
  b1_ = Vec::Zero(hidden_dim);
  b2_ = Vec::Zero(num_classes);
  input_mean_ = Vec::Zero(input_dim);
  vw1_ = Mat::Zero(hidden_dim, input_dim);
  vw2_ = Mat::Zero(num_classes, hidden_dim);
  vb1_ = Vec::Zero(hidden_dim);
  vb2_ = Vec::Zero(num_classes);
}

void Model::grow_head(int new_num_classes, Rng& rng) {
  const int old_c = num_classes();
  if (new_num_classes < old_c)
    throw std::invalid_argument("grow_head: cannot shrink");
  if (new_num_classes == old_c) return;
  const int h = hidden_dim();
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  w2_.conservativeResize(new_num_classes, Eigen::NoChange);
  for (int i = old_c; i < new_num_classes; ++i)
    for (int j = 0; j < h; ++j) w2_(i, j) = rng.uniform(-s2, s2);
  b2_.conservativeResize(new_num_classes);
  b2_.tail(new_num_classes - old_c).setZero();
  vw2_.conservativeResize(new_num_classes, Eigen::NoChange);
  vw2_.bottomRows(new_num_classes - old_c).setZero();
  vb2_.conservativeResize(new_num_classes);
  vb2_.tail(new_num_classes - old_c).setZero();
}

void Model::set_input_standardization(const Vec& mean, double scale) {
  if (mean.size() != input_dim())
    throw std::invalid_argument("standardization: dimension mismatch");
  if (scale <= 0.0) throw std::invalid_argument("standardization: scale > 0");
  input_mean_ = mean;
  input_scale_ = scale;
}

Mat Model::standardize(const Eigen::Ref<const Mat>& x) const {
  return (x.rowwise() - input_mean_.transpose()) / input_scale_;
}

Forward Model::forward(const Eigen::Ref<const Mat>& x) const {
  if (x.cols() != input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  Forward f;
  f.input = standardize(x);
  f.pre = (f.input * w1_.transpose()).rowwise() + b1_.transpose();
  f.features = activation_apply(act_, f.pre);
  f.logits = (f.features * w2_.transpose()).rowwise() + b2_.transpose();
  f.probs = softmax_rows(f.logits);
  return f;
}

void Model::forward_one(const Eigen::Ref<const Vec>& x, Vec& feature,
                        Vec& logits, Vec& probs) const {
  Forward f = forward(x.transpose());
  feature = f.features.row(0).transpose();
  logits = f.logits.row(0).transpose();
  probs = f.probs.row(0).transpose();
}

Vec Model::encode(const Eigen::Ref<const Vec>& x) const {
  return encode_batch(x.transpose()).row(0).transpose();
}

Mat Model::encode_batch(const Eigen::Ref<const Mat>& x) const {
  if (x.cols() != input_dim())
    throw std::invalid_argument("encode: input dimension mismatch");
  Mat pre = (standardize(x) * w1_.transpose()).rowwise() + b1_.transpose();
  return activation_apply(act_, pre);
}

void Model::sgd_step(const Gradients& g, double lr, double momentum) {
  if (g.w1.rows() != w1_.rows() || g.w1.cols() != w1_.cols() ||
      g.w2.rows() != w2_.rows() || g.w2.cols() != w2_.cols() ||
      g.b1.size() != b1_.size() || g.b2.size() != b2_.size())
    throw std::invalid_argument("sgd_step: gradient shape mismatch");
  vw1_ = momentum * vw1_ + g.w1;
  vb1_ = momentum * vb1_ + g.b1;
  vw2_ = momentum * vw2_ + g.w2;
  vb2_ = momentum * vb2_ + g.b2;
  w1_ -= lr * vw1_;
  b1_ -= lr * vb1_;
  w2_ -= lr * vw2_;
  b2_ -= lr * vb2_;
}

Gradients Model::zero_gradients() const {
  Gradients g;
  g.w1 = Mat::Zero(w1_.rows(), w1_.cols());
  g.w2 = Mat::Zero(w2_.rows(), w2_.cols());
  g.b1 = Vec::Zero(b1_.size());
  g.b2 = Vec::Zero(b2_.size());
  return g;
}

std::vector<double*> Model::parameters() {
  std::vector<double*> out;
  auto push = [&out](double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(p + i);
  };
  push(w1_.data(), w1_.size());
  push(b1_.data(), b1_.size());
  push(w2_.data(), w2_.size());
  push(b2_.data(), b2_.size());
  return out;
}

double loss_ce(const Eigen::Ref<const Mat>& probs,
               const Eigen::Ref<const Mat>& pseudo) {
  if (probs.rows() != pseudo.rows() || probs.cols() != pseudo.cols())
    throw std::invalid_argument("loss_ce: batch shape mismatch");
  if (probs.rows() == 0) throw std::invalid_argument("loss_ce: empty batch");
  check_unit_rows(pseudo, "loss_ce");
  return -(pseudo.array() * safe_log(probs).array()).sum() / probs.rows();
}

double loss_kd(const Eigen::Ref<const Mat>& cur_old_probs,
               const Eigen::Ref<const Mat>& snap_old_probs) {
  if (cur_old_probs.rows() != snap_old_probs.rows() ||
      cur_old_probs.cols() != snap_old_probs.cols())
    throw std::invalid_argument("loss_kd: batch shape mismatch");
  if (cur_old_probs.rows() == 0) throw std::invalid_argument("loss_kd: empty batch");
  return -(snap_old_probs.array() * safe_log(cur_old_probs).array()).sum() /
         cur_old_probs.rows();
}

double loss_cr(const Eigen::Ref<const Mat>& pseudo,
               const Eigen::Ref<const Mat>& strong_probs) {
  return loss_ce(strong_probs, pseudo);
}

Vec augment(const Eigen::Ref<const Vec>& x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("augment: sigma >= 0");
  if (sigma == 0.0) return x;
  return x + sigma * rng.normal_vec(static_cast<int>(x.size()));
}

Mat augment_batch(const Eigen::Ref<const Mat>& x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("augment: sigma >= 0");
  Mat out = x;
  if (sigma == 0.0) return out;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) += sigma * rng.normal_vec(static_cast<int>(x.cols())).transpose();
  return out;
}

namespace {

// Accumulates parameter gradients for one forward pass given dLoss/dlogits.
void backprop(const Model& m, const Forward& f,
              const Eigen::Ref<const Mat>& g_logits, Gradients& out) {
  out.w2 += g_logits.transpose() * f.features;
  out.b2 += g_logits.colwise().sum().transpose();
  Mat g_feat = g_logits * m.w2();
  Mat g_pre =
      g_feat.array() * activation_grad(m.activation(), f.pre, f.features).array();
  out.w1 += g_pre.transpose() * f.input;
  out.b1 += g_pre.colwise().sum().transpose();
}

// Shared value/gradient path; `out == nullptr` computes values only.
BatchLosses total_loss_impl(const Model& model, const TotalLossInputs& in,
                            const LossWeights& weights, Gradients* out) {
  const Eigen::Index n = in.weak.rows();
  if (n == 0) throw std::invalid_argument("total_loss: empty batch");
  if (in.pseudo.rows() != n || in.strong.rows() != n)
    throw std::invalid_argument("total_loss: batch size mismatch");
  if (in.pseudo.cols() != model.num_classes())
    throw std::invalid_argument("total_loss: pseudo width mismatch");
  check_unit_rows(in.pseudo, "total_loss");

  BatchLosses losses;
  const double inv_n = 1.0 / static_cast<double>(n);

  Forward weak = model.forward(in.weak);
  losses.ce = loss_ce(weak.probs, in.pseudo);
  Mat g_logits_weak;
  if (out) g_logits_weak = weights.ce * inv_n * (weak.probs - in.pseudo);

  if (in.old_model != nullptr) {
    const int c_old = in.old_model->num_classes();
    if (c_old > model.num_classes())
      throw std::invalid_argument("total_loss: snapshot wider than model");
    const double t = in.kd_temperature;
    Forward old_fwd = in.old_model->forward(in.weak);
    Mat teacher = softmax_rows(old_fwd.logits.leftCols(c_old) / t);
    Mat student = softmax_rows(weak.logits.leftCols(c_old) / t);
    losses.kd = loss_kd(student, teacher);
    if (out)
      g_logits_weak.leftCols(c_old) +=
          weights.kd * inv_n / t * (student - teacher);
  }

  if (out) backprop(model, weak, g_logits_weak, *out);

  Forward strong = model.forward(in.strong);
  losses.cr = loss_cr(in.pseudo, strong.probs);
  if (out) {
    Mat g_logits_strong = weights.cr * inv_n * (strong.probs - in.pseudo);
    backprop(model, strong, g_logits_strong, *out);
  }
  return losses;
}

}  // namespace

BatchLosses total_loss_grad(const Model& model, const TotalLossInputs& in,
                            const LossWeights& weights, Gradients& out) {
  out = model.zero_gradients();
  return total_loss_impl(model, in, weights, &out);
}

BatchLosses total_loss(const Model& model, const TotalLossInputs& in) {
  return total_loss_impl(model, in, LossWeights{}, nullptr);
}

}  // namespace ipll
