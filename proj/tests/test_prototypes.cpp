#include <doctest.h>

#include "ipll/prototypes.hpp"

using namespace ipll;

namespace {

PrototypeBank bank_with(const std::vector<Vec>& protos, double gamma = 0.5) {
  PrototypeBank bank;
  bank.gamma = gamma;
  bank.ensure_classes(static_cast<int>(protos.size()),
                      static_cast<int>(protos[0].size()));
  for (std::size_t c = 0; c < protos.size(); ++c) {
    bank.prototypes.row(c) = protos[c].transpose();
    bank.initialized[c] = 1;
  }
  return bank;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("assign_class_features follows the restricted argmax") {
  Rng rng(1);
  Model m(2, 2, 3, Activation::Identity, rng);
  m.w1().setIdentity();
  m.b1().setZero();
  m.w2() << 1.0, 0.0, 0.0, 1.0, -1.0, -1.0;  // logits: x0, x1, -x0-x1
  m.b2().setZero();

  Mat x(3, 2);
  x << 5.0, 1.0,   // argmax over all = 0
       1.0, 5.0,   // argmax over all = 1
       5.0, 1.0;
  std::vector<std::vector<int>> cands = {{0, 1, 2}, {0, 1, 2}, {1, 2}};
  const auto per_class = assign_class_features(m, x, cands);
  CHECK(per_class[0].size() == 1);
  CHECK(per_class[1].size() == 2);  // row 2 restricted away from class 0
  CHECK(per_class[2].empty());

  // singleton candidate set always lands in its class
  std::vector<std::vector<int>> singleton = {{2}, {2}, {2}};
  const auto forced = assign_class_features(m, x, singleton);
  CHECK(forced[2].size() == 3);
  CHECK(forced[0].empty());
}

TEST_CASE("update_prototypes momentum arithmetic") {
  PrototypeBank bank = bank_with({v2(0.0, 0.0), v2(4.0, 4.0)}, 0.5);

  std::vector<std::vector<Vec>> feats(2);
  feats[0] = {v2(2.0, 2.0)};
  update_prototypes(bank, feats);
  CHECK(bank.prototypes.row(0) == Eigen::RowVector2d(1.0, 1.0));
  CHECK(bank.prototypes.row(1) == Eigen::RowVector2d(4.0, 4.0));  // empty keeps

  SUBCASE("gamma 1 never moves") {
    PrototypeBank frozen = bank_with({v2(3.0, 3.0)}, 1.0);
    std::vector<std::vector<Vec>> f(1);
    f[0] = {v2(100.0, -100.0), v2(7.0, 7.0)};
    update_prototypes(frozen, f);
    CHECK(frozen.prototypes.row(0) == Eigen::RowVector2d(3.0, 3.0));
  }
  SUBCASE("gamma 0 jumps to the mean") {
    PrototypeBank jump = bank_with({v2(3.0, 3.0)}, 0.0);
    std::vector<std::vector<Vec>> f(1);
    f[0] = {v2(1.0, 0.0), v2(3.0, 0.0)};
    update_prototypes(jump, f);
    CHECK(jump.prototypes.row(0) == Eigen::RowVector2d(2.0, 0.0));
  }
}

TEST_CASE("first appearance takes the plain mean") {
  PrototypeBank bank;
  bank.gamma = 0.5;
  std::vector<std::vector<Vec>> feats(2);
  feats[1] = {v2(2.0, 0.0), v2(4.0, 2.0)};
  update_prototypes(bank, feats);
  CHECK_FALSE(bank.initialized[0]);
  CHECK(bank.initialized[1]);
  CHECK(bank.prototypes.row(1) == Eigen::RowVector2d(3.0, 1.0));
}

TEST_CASE("momentum update stays on the segment toward the mean") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const double gamma = rng.uniform(0.05, 0.95);
    Vec old_proto = rng.normal_vec(3);
    PrototypeBank bank;
    bank.gamma = gamma;
    bank.ensure_classes(1, 3);
    bank.prototypes.row(0) = old_proto.transpose();
    bank.initialized[0] = 1;
    std::vector<std::vector<Vec>> feats(1);
    for (int k = 0; k < 4; ++k) feats[0].push_back(rng.normal_vec(3));
    Vec mean = Vec::Zero(3);
    for (const Vec& f : feats[0]) mean += f;
    mean /= 4.0;
    update_prototypes(bank, feats);
    for (int i = 0; i < 3; ++i) {
      const double lo = std::min(old_proto[i], mean[i]) - 1e-12;
      const double hi = std::max(old_proto[i], mean[i]) + 1e-12;
      CHECK(bank.prototypes(0, i) >= lo);
      CHECK(bank.prototypes(0, i) <= hi);
    }
  }
}

TEST_CASE("classify_by_prototype basics") {
  PrototypeBank bank = bank_with({v2(0.0, 0.0), v2(10.0, 0.0)});
  CHECK(classify_by_prototype(bank, v2(0.0, 0.0)) == 0);
  CHECK(classify_by_prototype(bank, v2(1.0, 0.0)) == 0);
  CHECK(classify_by_prototype(bank, v2(9.0, 0.0)) == 1);
  CHECK(classify_by_prototype(bank, v2(5.0, 0.0)) == 0);  // tie -> smaller index

  PrototypeBank empty;
  empty.ensure_classes(2, 2);
  CHECK_THROWS_AS(classify_by_prototype(empty, v2(0.0, 0.0)), std::invalid_argument);
}

TEST_CASE("classification is permutation invariant") {
  Rng rng(9);
  std::vector<Vec> protos;
  for (int c = 0; c < 5; ++c) protos.push_back(rng.normal_vec(4) * 3.0);
  PrototypeBank bank = bank_with(protos);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  std::vector<Vec> permuted(5, Vec());
  for (int c = 0; c < 5; ++c) permuted[perm[c]] = protos[c];
  PrototypeBank bank_p = bank_with(permuted);
  for (int trial = 0; trial < 50; ++trial) {
    Vec q = rng.normal_vec(4) * 2.0;
    CHECK(classify_by_prototype(bank_p, q) == perm[classify_by_prototype(bank, q)]);
  }
}
