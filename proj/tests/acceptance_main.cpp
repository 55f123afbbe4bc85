// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Criteria run against fixed seeds and the fixed desk-scale stream, with
// every tolerance written out next to its check.

#include "ipll/config.hpp"
#include "ipll/datagen.hpp"
#include "ipll/disambiguation.hpp"
#include "ipll/trainer.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace {

using Clock = std::chrono::steady_clock;

struct Criterion {
  std::string name;
  double limit_seconds;
  std::function<bool(std::string&)> run;
};

bool require(bool ok, const std::string& what, std::string& detail) {
  if (!ok && detail.empty()) detail = what;
  return ok;
}

// ---- criterion 1: gradient suite ------------------------------------------

bool gradient_suite(std::string& detail) {
  using ipll::testing::GradFixture;
  using ipll::testing::max_relative_gradient_error;
  GradFixture f(4, 5, 3, 6, 31);
  bool ok = true;
  {
    ipll::TotalLossInputs in{f.weak, f.strong, f.pseudo, nullptr, 1.0};
    const double e = max_relative_gradient_error(f.model, in, {1.0, 0.0, 0.0});
    ok &= require(e < 1e-4, "L_ce rel err " + std::to_string(e), detail);
  }
  {
    ipll::TotalLossInputs in{f.weak, f.strong, f.pseudo, &f.old_model, 1.0};
    const double e = max_relative_gradient_error(f.model, in, {0.0, 1.0, 0.0});
    ok &= require(e < 1e-4, "L_kd rel err " + std::to_string(e), detail);
  }
  {
    ipll::TotalLossInputs in{f.weak, f.strong, f.pseudo, nullptr, 1.0};
    const double e = max_relative_gradient_error(f.model, in, {0.0, 0.0, 1.0});
    ok &= require(e < 1e-4, "L_cr rel err " + std::to_string(e), detail);
  }
  {
    ipll::TotalLossInputs in{f.weak, f.strong, f.pseudo, &f.old_model, 1.0};
    const double e = max_relative_gradient_error(f.model, in, {1.0, 1.0, 1.0});
    ok &= require(e < 1e-4, "weighted sum rel err " + std::to_string(e), detail);
  }
  return ok;
}

// ---- criterion 2: gmm suite ------------------------------------------------

bool gmm_suite(std::string& detail) {
  ipll::Rng rng(17);
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
  const ipll::Gmm1D g = ipll::fit_gmm_1d(values, ipll::SeparationConfig{});
  bool ok = true;
  ok &= require(std::abs(g.mean[0]) < 0.2, "mean0 off by " + std::to_string(g.mean[0]),
                detail);
  ok &= require(std::abs(g.mean[1] - 10.0) < 0.2,
                "mean1 off by " + std::to_string(g.mean[1] - 10.0), detail);
  int correct = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    correct += (ipll::posterior_old(g, values[i]) > 0.5) == (source[i] == 0);
  ok &= require(correct >= 1980, "posterior classification " + std::to_string(correct) +
                                     "/2000",
                detail);
  for (std::size_t i = 1; i < g.loglik_trace.size(); ++i)
    ok &= require(g.loglik_trace[i] >= g.loglik_trace[i - 1] - 1e-9,
                  "log-likelihood decreased at iteration " + std::to_string(i), detail);
  return ok;
}

// ---- criterion 3: memory oracle --------------------------------------------

bool memory_oracle(std::string& detail) {
  ipll::Rng rng(73);
  for (int trial = 0; trial < 25; ++trial) {
    ipll::testing::PoolFixture f = ipll::testing::random_pool(rng, 3, 12);
    ipll::MemoryConfig config;
    config.k_neighbors = 3;
    config.diverse_fraction = 0.67;
    const int b_c = 4;
    config.budget = b_c * f.num_classes;
    std::vector<int> seen(f.num_classes);
    std::iota(seen.begin(), seen.end(), 0);

    const ipll::EpisodicMemory mem =
        ipll::rebuild_memory(f.pool, f.bank, config, seen);
    std::vector<int> got;
    for (const ipll::MemoryEntry& e : mem.entries) got.push_back(e.sample.id);
    std::sort(got.begin(), got.end());
    const auto expected = ipll::testing::slow_reference_ids(
        f.pool, f.bank, f.num_classes, b_c, config.k_neighbors,
        config.diverse_fraction);
    if (got != expected) {
      detail = "id mismatch on trial " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

// ---- criterion 4: pseudo-label invariants -----------------------------------

bool pseudo_invariants(std::string& detail) {
  ipll::Rng rng(37);
  for (int trial = 0; trial < 10000; ++trial) {
    const int c = 3 + static_cast<int>(rng.uniform_int(8));
    std::vector<int> cand;
    for (int j = 0; j < c; ++j)
      if (rng.uniform() < 0.5) cand.push_back(j);
    if (cand.empty()) cand.push_back(static_cast<int>(rng.uniform_int(c)));
    const ipll::Vec logits = rng.normal_vec(c);
    const double beta = rng.uniform(0.0, 1.0);
    ipll::Vec p = ipll::init_pseudo(cand, c);
    ipll::Vec z = ipll::Vec::Zero(c);
    z[ipll::argmax_restricted(logits, cand)] = 1.0;
    const double d0 = (p - z).lpNorm<1>();
    const int steps = 1 + static_cast<int>(rng.uniform_int(20));
    for (int k = 1; k <= steps; ++k) {
      ipll::update_pseudo(p, logits, cand, beta);
      if (std::abs(p.sum() - 1.0) > 1e-9) {
        detail = "sum drifted on trial " + std::to_string(trial);
        return false;
      }
      if (p.minCoeff() < 0.0) {
        detail = "negative mass on trial " + std::to_string(trial);
        return false;
      }
      for (int j = 0; j < c; ++j)
        if (p[j] > 0.0 && !ipll::set_contains(cand, j)) {
          detail = "support escaped the candidate set on trial " +
                   std::to_string(trial);
          return false;
        }
      const double expected = std::pow(beta, k) * d0;
      if (std::abs((p - z).lpNorm<1>() - expected) > 1e-9) {
        detail = "geometric convergence violated on trial " + std::to_string(trial);
        return false;
      }
    }
  }
  return true;
}

// ---- criterion 5: generator statistics --------------------------------------

bool generator_statistics(std::string& detail) {
  bool ok = true;
  {
    std::vector<int> space(20);
    std::iota(space.begin(), space.end(), 0);
    const double q = 0.1;
    ipll::Rng rng(77);
    double total = 0.0;
    const int trials = 100000;
    for (int i = 0; i < trials; ++i) {
      const auto s = ipll::flip_uniform(5, space, q, rng);
      total += static_cast<double>(s.size());
      if (!ipll::set_contains(s, 5)) {
        detail = "true label missing from a candidate set";
        return false;
      }
    }
    const double mean = total / trials;
    const double sigma = std::sqrt(19.0 * q * (1.0 - q) / trials);
    ok &= require(std::abs(mean - 2.9) < 3.0 * sigma,
                  "mean |S| = " + std::to_string(mean), detail);
  }
  // blurry split counts, W in {70, 90, 100}
  for (int w : {70, 90, 100}) {
    ipll::DatasetSpec dspec;
    dspec.num_classes = 10;
    dspec.feature_dim = 4;
    dspec.samples_per_class = 100;
    dspec.cluster_separation = 6.0;
    dspec.cluster_stddev = 0.5;
    dspec.seed = 21;
    ipll::StreamSpec sspec;
    sspec.num_tasks = 5;
    sspec.blurry_w = w;
    sspec.flip_q = 0.1;
    sspec.seed = 21;
    const ipll::TaskStream s =
        ipll::build_blurry_stream(ipll::make_gaussian_dataset(dspec), sspec);
    for (int c = 0; c < dspec.num_classes; ++c) {
      std::vector<int> counts(sspec.num_tasks, 0);
      for (int t = 0; t < sspec.num_tasks; ++t)
        for (const ipll::Sample& x : s.train[t])
          if (x.true_label == c) ++counts[t];
      const int t0 = s.class_intro_task[c];
      const int n = dspec.samples_per_class;
      std::vector<int> expect(sspec.num_tasks, 0);
      if (t0 == sspec.num_tasks - 1 || w == 100) {
        expect[t0] = n;
      } else {
        const int home = n * w / 100;
        expect[t0] = home;
        const int rest = n - home;
        const int later = sspec.num_tasks - 1 - t0;
        for (int k = 0; k < later; ++k)
          expect[t0 + 1 + k] = rest / later + (k < rest % later ? 1 : 0);
      }
      if (counts != expect) {
        detail = "W=" + std::to_string(w) + " class " + std::to_string(c) +
                 ": split counts mismatch";
        ok = false;
      }
    }
  }
  return ok;
}

// ---- criterion 6: end-to-end directional claims ------------------------------

struct DeskRuns {
  ipll::ExperimentResult pgdr, no_memory, random_memory, distance_memory;
};

ipll::TaskStream desk_stream() {
  ipll::DatasetSpec dspec;
  dspec.num_classes = 10;
  dspec.feature_dim = 16;
  dspec.samples_per_class = 24;  // scarce blurry leakage makes replay matter
  dspec.cluster_separation = 10.0;
  dspec.cluster_stddev = 0.5;
  dspec.seed = 7;
  ipll::StreamSpec sspec;
  sspec.num_tasks = 5;
  sspec.blurry_w = 90;  // 10-blurry
  sspec.flip_q = 0.3;
  sspec.seed = 7;
  return ipll::build_blurry_stream(ipll::make_gaussian_dataset(dspec), sspec);
}

ipll::PGDRConfig desk_config() {
  ipll::PGDRConfig c;  // desk defaults: epochs 30, batch 64, lr 0.05, h 32
  c.mem.budget = 60;   // 6 slots per class by the final task
  c.seed = 7;
  return c;
}

bool end_to_end(std::string& detail) {
  const ipll::TaskStream stream = desk_stream();
  ipll::PGDRConfig config = desk_config();

  DeskRuns runs;
  config.variant = ipll::Variant::PGDR;
  runs.pgdr = ipll::run_stream(stream, config);
  config.variant = ipll::Variant::NoMemory;
  runs.no_memory = ipll::run_stream(stream, config);
  config.variant = ipll::Variant::RandomMemory;
  runs.random_memory = ipll::run_stream(stream, config);
  config.variant = ipll::Variant::DistanceMemory;
  runs.distance_memory = ipll::run_stream(stream, config);

  bool ok = true;
  // 6a: memory keeps final-task old-class accuracy up by >= 10 points
  const double old_pgdr = runs.pgdr.report.tasks.back().acc_old;
  const double old_nomem = runs.no_memory.report.tasks.back().acc_old;
  ok &= require(old_pgdr - old_nomem >= 10.0,
                "6a: old-class gap " + std::to_string(old_pgdr - old_nomem), detail);
  // 6b: curated memory at least matches random, and distance within 1 point
  const double a_pgdr = runs.pgdr.report.a_bar;
  ok &= require(a_pgdr >= runs.random_memory.report.a_bar,
                "6b: PGDR " + std::to_string(a_pgdr) + " < RANDOM " +
                    std::to_string(runs.random_memory.report.a_bar),
                detail);
  ok &= require(a_pgdr >= runs.distance_memory.report.a_bar - 1.0,
                "6b: PGDR " + std::to_string(a_pgdr) + " < DISTANCE - 1 " +
                    std::to_string(runs.distance_memory.report.a_bar),
                detail);
  // 6c: prototype evaluation holds up against the linear head
  double proto_bar = 0.0, linear_bar = 0.0;
  for (const ipll::TaskMetrics& m : runs.pgdr.report.tasks) {
    proto_bar += m.acc_all_prototype;
    linear_bar += m.acc_all_linear;
  }
  proto_bar /= runs.pgdr.report.tasks.size();
  linear_bar /= runs.pgdr.report.tasks.size();
  ok &= require(proto_bar >= linear_bar - 1.0,
                "6c: prototype " + std::to_string(proto_bar) + " vs linear " +
                    std::to_string(linear_bar),
                detail);
  // 6d: mean separation accuracy on this easy stream
  double sep_sum = 0.0;
  int sep_n = 0;
  for (const ipll::TaskMetrics& m : runs.pgdr.report.tasks)
    if (!std::isnan(m.sep_acc)) {
      sep_sum += m.sep_acc;
      ++sep_n;
    }
  const double sep_mean = sep_n ? sep_sum / sep_n : 0.0;
  ok &= require(sep_mean >= 80.0, "6d: mean separation accuracy " +
                                      std::to_string(sep_mean),
                detail);

  std::printf("      [6a old-class: PGDR %.2f vs NO_MEMORY %.2f]\n", old_pgdr, old_nomem);
  std::printf("      [6b a_bar: PGDR %.2f, RANDOM %.2f, DISTANCE %.2f]\n", a_pgdr,
              runs.random_memory.report.a_bar, runs.distance_memory.report.a_bar);
  std::printf("      [6c a_bar: prototype %.2f vs linear %.2f]\n", proto_bar, linear_bar);
  std::printf("      [6d mean separation accuracy: %.2f]\n", sep_mean);
  return ok;
}

// ---- criterion 7: determinism ------------------------------------------------

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

bool determinism(std::string& detail) {
  const ipll::TaskStream stream = desk_stream();
  const ipll::PGDRConfig config = desk_config();

  const auto base = std::filesystem::temp_directory_path() / "ipll-acceptance";
  std::filesystem::remove_all(base);
  ipll::run_to_dir(stream, config, (base / "first").string());
  ipll::run_to_dir(stream, config, (base / "second").string());
  const std::string a = file_bytes(base / "first" / "metrics.csv");
  const std::string b = file_bytes(base / "second" / "metrics.csv");
  std::filesystem::remove_all(base);
  if (a.empty()) {
    detail = "metrics.csv missing or empty";
    return false;
  }
  return require(a == b, "metrics.csv bytes differ between runs", detail);
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {"1. gradient suite vs central finite differences (rel err < 1e-4)", 5.0,
       gradient_suite},
      {"2. GMM suite: means +-0.2, posterior >= 99%, monotone log-likelihood", 1.0,
       gmm_suite},
      {"3. memory rebuild matches the slow reference on 25 instances", 5.0,
       memory_oracle},
      {"4. pseudo-label invariants over 10^4 randomized cases", 30.0,
       pseudo_invariants},
      {"5. generator statistics: flip mean within 3 sigma, exact blurry splits", 30.0,
       generator_statistics},
      {"6. end-to-end directional claims on the desk stream", 300.0, end_to_end},
      {"7. byte-identical metrics.csv across repeated runs", 120.0, determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    if (seconds > c.limit_seconds) {
      ok = false;
      detail = "runtime " + std::to_string(seconds) + "s exceeds " +
               std::to_string(c.limit_seconds) + "s";
    }
    std::printf("%s  %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", c.name.c_str(),
                seconds, detail.empty() ? "" : " -- ", detail.c_str());
    failures += !ok;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  else std::printf("all %zu criteria passed\n", criteria.size());
  return failures;
}
