#include <doctest.h>

#include "ipll/disambiguation.hpp"

#include <cmath>

using namespace ipll;

namespace {

PrototypeBank proto_bank(const std::vector<std::pair<int, Vec>>& entries, int n,
                         int dim) {
  PrototypeBank bank;
  bank.ensure_classes(n, dim);
  for (const auto& [c, v] : entries) {
    bank.prototypes.row(c) = v.transpose();
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

TEST_CASE("distance_set keeps only samples with measurable old candidates") {
  PrototypeBank bank =
      proto_bank({{0, v2(0.0, 0.0)}, {1, v2(10.0, 0.0)}}, 4, 2);
  const std::vector<int> old_space{0, 1};
  Mat feats(3, 2);
  feats << 3.0, 0.0,   // candidates {0,2}: e = dist to mu_0 = 3
           7.0, 0.0,   // candidates {0,1,3}: min(7, 3) = 3
           1.0, 0.0;   // candidates {2,3}: no old candidate, excluded
  const std::vector<std::vector<int>> cands = {{0, 2}, {0, 1, 3}, {2, 3}};
  const auto dset = distance_set(cands, feats, bank, old_space);
  REQUIRE(dset.size() == 2);
  CHECK(dset[0].first == 0);
  CHECK(dset[0].second == doctest::Approx(3.0));
  CHECK(dset[1].first == 1);
  CHECK(dset[1].second == doctest::Approx(3.0));
}

TEST_CASE("gmm separates a clean bimodal sample") {
  Rng rng(17);
  std::vector<double> values;
  std::vector<int> source;
  for (int i = 0; i < 1000; ++i) {
    values.push_back(rng.normal());
    source.push_back(0);
  }
  for (int i = 0; i < 1000; ++i) {
    values.push_back(10.0 + rng.normal());
    source.push_back(1);
  }
  SeparationConfig config;
  const Gmm1D g = fit_gmm_1d(values, config);
  CHECK(std::abs(g.mean[0] - 0.0) < 0.2);
  CHECK(std::abs(g.mean[1] - 10.0) < 0.2);
  CHECK(std::abs(g.weight[0] - 0.5) < 0.05);
  CHECK(std::abs(g.weight[1] - 0.5) < 0.05);

  int correct = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = posterior_old(g, values[i]);
    correct += (w > 0.5) == (source[i] == 0);
  }
  CHECK(correct >= 1980);  // >= 99%

  // log-likelihood never decreases along the EM trace
  for (std::size_t i = 1; i < g.loglik_trace.size(); ++i)
    CHECK(g.loglik_trace[i] >= g.loglik_trace[i - 1] - 1e-9);
}

TEST_CASE("gmm fit is deterministic") {
  Rng rng(3);
  std::vector<double> values;
  for (int i = 0; i < 200; ++i) values.push_back(rng.uniform(0.0, 1.0));
  for (int i = 0; i < 200; ++i) values.push_back(5.0 + rng.uniform(0.0, 1.0));
  SeparationConfig config;
  const Gmm1D a = fit_gmm_1d(values, config);
  const Gmm1D b = fit_gmm_1d(values, config);
  CHECK(a.mean[0] == b.mean[0]);
  CHECK(a.mean[1] == b.mean[1]);
  CHECK(a.var[0] == b.var[0]);
  CHECK(a.weight[0] == b.weight[0]);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("gmm rejects degenerate inputs") {
  SeparationConfig config;
  CHECK_THROWS_AS(fit_gmm_1d({1.0}, config), GmmDegenerateInput);
  CHECK_THROWS_AS(fit_gmm_1d({2.0, 2.0, 2.0}, config), GmmDegenerateInput);
  CHECK_NOTHROW(fit_gmm_1d({2.0, 2.5}, config));
}

TEST_CASE("posterior_old closed forms") {
  Gmm1D g;
  g.mean[0] = 0.0;
  g.mean[1] = 4.0;
  g.var[0] = g.var[1] = 1.0;
  g.weight[0] = g.weight[1] = 0.5;
  // equal-weight equal-variance components cross at the midpoint
  CHECK(std::abs(posterior_old(g, 2.0) - 0.5) < 1e-9);
  CHECK(posterior_old(g, -10.0) > 1.0 - 1e-9);
  CHECK(posterior_old(g, 14.0) < 1e-9);

  Gmm1D same;
  same.mean[0] = same.mean[1] = 1.0;
  same.var[0] = same.var[1] = 2.0;
  same.weight[0] = 0.3;
  same.weight[1] = 0.7;
  CHECK(posterior_old(same, 0.123) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("separate thresholds strictly") {
  const std::vector<std::pair<int, double>> posts{{0, 0.9}, {1, 0.5}, {3, 1.0}};
  const auto is_old = separate(5, posts, 0.8);
  CHECK(is_old[0]);
  CHECK_FALSE(is_old[1]);
  CHECK_FALSE(is_old[2]);  // absent from the distance set -> new
  CHECK(is_old[3]);
  CHECK_FALSE(is_old[4]);

  // alpha = 1 empties the old side (strict inequality)
  const auto none = separate(5, posts, 1.0);
  for (bool b : none) CHECK_FALSE(b);
}

TEST_CASE("reallocate follows the re-allocation cases") {
  // classes 0..19; old = 0..9, new = 10..19
  std::vector<int> old_space(10), new_space(10);
  for (int i = 0; i < 10; ++i) {
    old_space[i] = i;
    new_space[i] = 10 + i;
  }
  std::vector<std::pair<int, Vec>> protos;
  for (int c = 0; c < 10; ++c)
    protos.emplace_back(c, v2(static_cast<double>(10 * c), 0.0));
  PrototypeBank bank = proto_bank(protos, 20, 2);

  // old membership: nearest old prototype class 3 at feature (30, 0)
  const std::vector<int> s{3, 4, 11, 12};
  const auto old_result = reallocate(s, true, bank, v2(30.0, 0.0), new_space, old_space);
  CHECK(old_result == std::vector<int>{3, 11, 12});

  // new membership keeps only new candidates
  const auto new_result =
      reallocate({2, 11, 13}, false, bank, v2(0.0, 0.0), new_space, old_space);
  CHECK(new_result == std::vector<int>{11, 13});

  // new membership with no new candidates: nearest-prototype singleton
  const auto fallback =
      reallocate({2, 3}, false, bank, v2(26.0, 0.0), new_space, old_space);
  CHECK(fallback == std::vector<int>{3});
}

TEST_CASE("reallocate never leaves the original candidate set") {
  Rng rng(23);
  std::vector<int> old_space(6), new_space(6);
  for (int i = 0; i < 6; ++i) {
    old_space[i] = i;
    new_space[i] = 6 + i;
  }
  std::vector<std::pair<int, Vec>> protos;
  for (int c = 0; c < 6; ++c) protos.emplace_back(c, rng.normal_vec(2));
  PrototypeBank bank = proto_bank(protos, 12, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> cand;
    for (int c = 0; c < 12; ++c)
      if (rng.uniform() < 0.4) cand.push_back(c);
    if (cand.empty()) cand.push_back(static_cast<int>(rng.uniform_int(12)));
    const bool is_old = rng.uniform() < 0.5 &&
                        !set_intersect(cand, old_space).empty();
    const auto result =
        reallocate(cand, is_old, bank, rng.normal_vec(2), new_space, old_space);
    CHECK(!result.empty());
    for (int c : result) CHECK(set_contains(cand, c));  // S' subset of S
  }
}

TEST_CASE("init_pseudo spreads uniformly") {
  const Vec p = init_pseudo({2, 5}, 8);
  CHECK(p[2] == 0.5);
  CHECK(p[5] == 0.5);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(init_pseudo({7}, 8)[7] == 1.0);
  const Vec q = init_pseudo({0, 1, 2, 3}, 4);
  for (int i = 0; i < 4; ++i) CHECK(q[i] == 0.25);
  CHECK_THROWS_AS(init_pseudo({}, 4), std::invalid_argument);
}

TEST_CASE("update_pseudo momentum arithmetic") {
  Vec logits(3);
  logits << 5.0, 1.0, 0.0;
  Vec p(3);
  p << 0.5, 0.5, 0.0;

  Vec frozen = p;
  update_pseudo(frozen, logits, {0, 1, 2}, 1.0);
  CHECK(frozen == p);

  Vec jump = p;
  update_pseudo(jump, logits, {0, 1, 2}, 0.0);
  CHECK(jump[0] == 1.0);

  Vec blend = p;
  update_pseudo(blend, logits, {0, 1, 2}, 0.6);
  CHECK(blend[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(blend[1] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(blend[2] == 0.0);
}

TEST_CASE("pseudo-label invariants under random updates") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const int c = 3 + static_cast<int>(rng.uniform_int(8));
    std::vector<int> cand;
    for (int j = 0; j < c; ++j)
      if (rng.uniform() < 0.5) cand.push_back(j);
    if (cand.empty()) cand.push_back(static_cast<int>(rng.uniform_int(c)));
    Vec p = init_pseudo(cand, c);
    for (int step = 0; step < 10; ++step) {
      const Vec logits = rng.normal_vec(c);
      update_pseudo(p, logits, cand, rng.uniform(0.0, 1.0));
      CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
      CHECK(p.minCoeff() >= 0.0);
      for (int j = 0; j < c; ++j)
        if (p[j] > 0.0) CHECK(set_contains(cand, j));
    }
  }
}

TEST_CASE("frozen logits drive geometric convergence to the one-hot target") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 4 + static_cast<int>(rng.uniform_int(6));
    std::vector<int> cand;
    for (int j = 0; j < c; ++j)
      if (rng.uniform() < 0.6) cand.push_back(j);
    if (cand.empty()) cand.push_back(0);
    const Vec logits = rng.normal_vec(c);
    const double beta = rng.uniform(0.1, 0.95);
    Vec p = init_pseudo(cand, c);
    Vec z = Vec::Zero(c);
    z[argmax_restricted(logits, cand)] = 1.0;
    const double d0 = (p - z).lpNorm<1>();
    Vec q = p;
    for (int k = 1; k <= 20; ++k) {
      update_pseudo(q, logits, cand, beta);
      const double expected = std::pow(beta, k) * d0;
      CHECK((q - z).lpNorm<1>() == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("beta schedule endpoints and midpoint") {
  CHECK(beta_at(0, 30, 0.8, 0.6) == 0.8);
  CHECK(beta_at(29, 30, 0.8, 0.6) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(beta_at(2, 5, 0.8, 0.6) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(beta_at(0, 1, 0.8, 0.6) == 0.8);
  CHECK_THROWS_AS(beta_at(0, 0, 0.8, 0.6), std::invalid_argument);
}
