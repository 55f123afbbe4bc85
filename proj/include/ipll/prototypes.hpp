#pragma once

#include "ipll/math.hpp"
#include "ipll/model.hpp"

#include <vector>

namespace ipll {

/// Per-class feature centroids with momentum state.  A prototype exists
/// only after its class has received at least one assigned sample.
struct PrototypeBank {
  Mat prototypes;                  // num_classes x feature_dim(h), zero rows until initialized
  std::vector<char> initialized;   // per class
  double gamma = 0.5;

  int num_classes() const { return static_cast<int>(prototypes.rows()); }
  void ensure_classes(int num_classes, int feature_dim);
  std::vector<int> initialized_classes() const;
};

/// Groups phi(x_i) by the classifier's candidate-restricted prediction
/// c = argmax_{j in S_i} f_j(x_i).  `inputs` rows align with `candidates`.
std::vector<std::vector<Vec>> assign_class_features(
    const Model& model, const Eigen::Ref<const Mat>& inputs,
    const std::vector<std::vector<int>>& candidates);

/// Momentum update mu_c <- gamma*mu_c + (1-gamma)*mean(P_c).  First
/// appearance of a class takes the plain mean; classes with empty P_c
/// keep their prototype.
void update_prototypes(PrototypeBank& bank,
                       const std::vector<std::vector<Vec>>& per_class_features);

/// Nearest initialized prototype; ties break to the smallest class index.
int classify_by_prototype(const PrototypeBank& bank,
                          const Eigen::Ref<const Vec>& feature);

}  // namespace ipll
