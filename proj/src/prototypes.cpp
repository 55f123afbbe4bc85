#include "ipll/prototypes.hpp"

namespace ipll {

void PrototypeBank::ensure_classes(int num, int feature_dim) {
  const int old_num = num_classes();
  if (num <= old_num) return;
  if (old_num == 0) {
    prototypes = Mat::Zero(num, feature_dim);
  } else {
    if (feature_dim != prototypes.cols())
      throw std::invalid_argument("prototype bank: feature dim changed");
    prototypes.conservativeResize(num, Eigen::NoChange);
    prototypes.bottomRows(num - old_num).setZero();
  }
  initialized.resize(num, 0);
}

std::vector<int> PrototypeBank::initialized_classes() const {
  std::vector<int> out;
  for (int c = 0; c < num_classes(); ++c)
    if (initialized[c]) out.push_back(c);
  return out;
}

std::vector<std::vector<Vec>> assign_class_features(
    const Model& model, const Eigen::Ref<const Mat>& inputs,
    const std::vector<std::vector<int>>& candidates) {
  if (static_cast<std::size_t>(inputs.rows()) != candidates.size())
    throw std::invalid_argument("assign_class_features: row/candidate mismatch");
  std::vector<std::vector<Vec>> per_class(model.num_classes());
  if (inputs.rows() == 0) return per_class;
  const Forward f = model.forward(inputs);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const int c = argmax_restricted(f.logits.row(i).transpose(), candidates[i]);
    per_class[c].push_back(f.features.row(i).transpose());
  }
  return per_class;
}

void update_prototypes(PrototypeBank& bank,
                       const std::vector<std::vector<Vec>>& per_class_features) {
  const int num = static_cast<int>(per_class_features.size());
  int dim = static_cast<int>(bank.prototypes.cols());
  for (const auto& feats : per_class_features)
    if (!feats.empty()) { dim = static_cast<int>(feats.front().size()); break; }
  bank.ensure_classes(num, dim);
  for (int c = 0; c < num; ++c) {
    const auto& feats = per_class_features[c];
    if (feats.empty()) continue;  // retain the previous prototype
    Vec mean = Vec::Zero(bank.prototypes.cols());
    for (const Vec& f : feats) {
      if (f.size() != bank.prototypes.cols())
        throw std::invalid_argument("update_prototypes: feature dim mismatch");
      mean += f;
    }
    mean /= static_cast<double>(feats.size());
    if (bank.initialized[c]) {
      bank.prototypes.row(c) =
          bank.gamma * bank.prototypes.row(c) + (1.0 - bank.gamma) * mean.transpose();
    } else {
      bank.prototypes.row(c) = mean.transpose();
      bank.initialized[c] = 1;
    }
  }
}

int classify_by_prototype(const PrototypeBank& bank,
                          const Eigen::Ref<const Vec>& feature) {
  const std::vector<int> classes = bank.initialized_classes();
  if (classes.empty())
    throw std::invalid_argument("classify_by_prototype: no initialized prototype");
  Vec dists(bank.num_classes());
  dists.setConstant(std::numeric_limits<double>::infinity());
  for (int c : classes)
    dists[c] = (bank.prototypes.row(c).transpose() - feature).norm();
  return argmin_restricted(dists, classes);
}

}  // namespace ipll
