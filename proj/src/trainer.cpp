#include "ipll/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace ipll {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt10(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

Variant variant_from_string(const std::string& s) {
  if (s == "PGDR") return Variant::PGDR;
  if (s == "MP") return Variant::MP;
  if (s == "PP") return Variant::PP;
  if (s == "NO_MEMORY") return Variant::NoMemory;
  if (s == "RANDOM_MEMORY") return Variant::RandomMemory;
  if (s == "DISTANCE_MEMORY") return Variant::DistanceMemory;
  if (s == "LINEAR_EVAL") return Variant::LinearEval;
  if (s == "NO_CR") return Variant::NoCr;
  if (s == "NO_KD") return Variant::NoKd;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::PGDR: return "PGDR";
    case Variant::MP: return "MP";
    case Variant::PP: return "PP";
    case Variant::NoMemory: return "NO_MEMORY";
    case Variant::RandomMemory: return "RANDOM_MEMORY";
    case Variant::DistanceMemory: return "DISTANCE_MEMORY";
    case Variant::LinearEval: return "LINEAR_EVAL";
    case Variant::NoCr: return "NO_CR";
    case Variant::NoKd: return "NO_KD";
  }
  return "?";
}

void PGDRConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("config: epochs >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size >= 1");
  if (lr < 0.0) throw std::invalid_argument("config: lr >= 0");
  if (sgd_momentum < 0.0 || sgd_momentum >= 1.0)
    throw std::invalid_argument("config: sgd_momentum in [0,1)");
  if (weights.ce < 0.0 || weights.kd < 0.0 || weights.cr < 0.0)
    throw std::invalid_argument("config: loss weights >= 0");
  if (sep.alpha <= 0.0 || sep.alpha > 1.0)
    throw std::invalid_argument("config: alpha in (0,1]");
  if (sep.beta_start < 0.0 || sep.beta_start > 1.0 || sep.beta_end < 0.0 ||
      sep.beta_end > 1.0)
    throw std::invalid_argument("config: beta in [0,1]");
  if (mem.budget < 1) throw std::invalid_argument("config: memory_budget >= 1");
  if (mem.k_neighbors < 1) throw std::invalid_argument("config: knn_k >= 1");
  if (mem.diverse_fraction < 0.0 || mem.diverse_fraction > 1.0)
    throw std::invalid_argument("config: diverse_fraction in [0,1]");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("config: gamma in [0,1]");
  if (hidden_dim < 1) throw std::invalid_argument("config: hidden_dim >= 1");
  if (aug_sigma_weak < 0.0 || aug_sigma_strong < 0.0)
    throw std::invalid_argument("config: augment sigma >= 0");
  if (kd_temperature <= 0.0) throw std::invalid_argument("config: kd_temperature > 0");
}

VariantHooks apply_variant(Variant tag, const PGDRConfig& config) {
  VariantHooks h;
  h.weights = config.weights;
  h.mem = config.mem;
  h.eval_mode = config.eval_classifier;
  switch (tag) {
    case Variant::PGDR: break;
    case Variant::MP:
      h.use_separation = false;
      h.momentum_pseudo = false;
      break;
    case Variant::PP:
      h.prototype_z = true;
      h.prototypes_every_epoch = true;
      break;
    case Variant::NoMemory: h.use_memory = false; break;
    case Variant::RandomMemory: h.random_memory = true; break;
    case Variant::DistanceMemory: h.mem.diverse_fraction = 0.0; break;
    case Variant::LinearEval: h.eval_mode = EvalMode::Linear; break;
    case Variant::NoCr: h.weights.cr = 0.0; break;
    case Variant::NoKd: h.weights.kd = 0.0; break;
  }
  return h;
}

TrainerState::TrainerState(const PGDRConfig& config)
    : init_rng(Rng(config.seed).derive("model-init")),
      shuffle_rng(Rng(config.seed).derive("batch-shuffle")),
      augment_rng(Rng(config.seed).derive("augment")),
      memrand_rng(Rng(config.seed).derive("memory-random")) {
  bank.gamma = config.gamma;
}

namespace {

// Nearest initialized candidate prototype, or -1 when none exists yet.
int prototype_target(const PrototypeBank& bank, const Eigen::Ref<const Vec>& feature,
                     const std::vector<int>& candidates) {
  std::vector<int> usable;
  for (int j : candidates)
    if (j < bank.num_classes() && bank.initialized[j]) usable.push_back(j);
  if (usable.empty()) return -1;
  Vec dists(bank.num_classes());
  dists.setConstant(std::numeric_limits<double>::infinity());
  for (int j : usable)
    dists[j] = (bank.prototypes.row(j).transpose() - feature).norm();
  return argmin_restricted(dists, usable);
}

double mean_pairwise_prototype_distance(const PrototypeBank& bank) {
  const std::vector<int> classes = bank.initialized_classes();
  if (classes.size() < 2) return 0.0;
  double sum = 0.0;
  int count = 0;
  for (std::size_t a = 0; a < classes.size(); ++a)
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      sum += (bank.prototypes.row(classes[a]) - bank.prototypes.row(classes[b])).norm();
      ++count;
    }
  return sum / count;
}

// Budgets per head row, with the remainder slots handed by global class id.
std::vector<int> budgets_for_head(int budget, const std::vector<int>& head_classes) {
  std::vector<int> sorted_global(head_classes);
  std::sort(sorted_global.begin(), sorted_global.end());
  const std::vector<int> by_global = per_class_budgets(budget, sorted_global);
  std::vector<int> out(head_classes.size());
  for (std::size_t k = 0; k < head_classes.size(); ++k) {
    const auto it = std::lower_bound(sorted_global.begin(), sorted_global.end(),
                                     head_classes[k]);
    out[k] = by_global[it - sorted_global.begin()];
  }
  return out;
}

}  // namespace

Model initial_model(const TaskStream& stream, const PGDRConfig& config,
                    Rng& init_rng) {
  const std::vector<Sample>& first = stream.train.empty() ? std::vector<Sample>{}
                                                          : stream.train.front();
  Model model(stream.feature_dim, config.hidden_dim,
              static_cast<int>(stream.new_classes(0).size()), config.activation,
              init_rng);
  if (!first.empty()) {
    Vec mean = Vec::Zero(stream.feature_dim);
    for (const Sample& s : first) mean += s.features;
    mean /= static_cast<double>(first.size());
    double var = 0.0;
    for (const Sample& s : first) var += (s.features - mean).squaredNorm();
    var /= static_cast<double>(first.size()) * stream.feature_dim;
    const double scale = std::sqrt(var);
    if (scale > 0.0) model.set_input_standardization(mean, scale);
  }
  return model;
}

void run_task(TrainerState& st, const TaskStream& stream, int t,
              const PGDRConfig& cfg, const VariantHooks& hooks,
              ExperimentReport& rep) {
  const std::vector<int> y_new_global = stream.new_classes(t);
  const int c_old = static_cast<int>(st.head_classes.size());

  for (int c : y_new_global) st.head_classes.push_back(c);
  const int c_now = static_cast<int>(st.head_classes.size());
  if (t == 0) {
    st.model = initial_model(stream, cfg, st.init_rng);
  } else if (c_now > c_old) {
    st.model.grow_head(c_now, st.init_rng);
  }
  st.bank.ensure_classes(c_now, cfg.hidden_dim);
  for (MemoryEntry& e : st.memory) {
    const int old_n = static_cast<int>(e.pseudo.size());
    if (old_n < c_now) {
      e.pseudo.conservativeResize(c_now);
      e.pseudo.tail(c_now - old_n).setZero();
    }
  }

  std::vector<int> head_of(stream.num_classes, -1);
  for (int k = 0; k < c_now; ++k) head_of[st.head_classes[k]] = k;
  auto to_head = [&](const std::vector<int>& global) {
    std::vector<int> out;
    out.reserve(global.size());
    for (int c : global) {
      if (head_of[c] < 0) throw std::logic_error("candidate outside current head");
      out.push_back(head_of[c]);
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  const std::vector<Sample>& dt = stream.train[t];
  const int n_cur = static_cast<int>(dt.size());
  std::vector<std::vector<int>> cand(n_cur), s_prime(n_cur);
  Mat x_cur(n_cur, stream.feature_dim);
  for (int i = 0; i < n_cur; ++i) {
    cand[i] = to_head(dt[i].candidates);
    s_prime[i] = cand[i];
    x_cur.row(i) = dt[i].features.transpose();
  }

  std::vector<int> old_space(c_old), new_space(c_now - c_old);
  std::iota(old_space.begin(), old_space.end(), 0);
  std::iota(new_space.begin(), new_space.end(), c_old);

  TaskMetrics metrics;
  metrics.task = t + 1;
  metrics.sep_acc = kNaN;
  metrics.loss_ce = metrics.loss_kd = metrics.loss_cr = kNaN;
  metrics.probe_loss_first = metrics.probe_loss_last = kNaN;

  // Old/new separation and candidate re-allocation, once per task before
  // the epoch loop (skipped at the first task and under MP).
  if (t > 0 && hooks.use_separation && n_cur > 0) {
    const Mat feats = st.model.encode_batch(x_cur);
    const auto dset = distance_set(cand, feats, st.bank, old_space);
    std::vector<bool> is_old(n_cur, false);
    std::vector<double> e_of(n_cur, kNaN), w_of(n_cur, kNaN);
    if (!dset.empty()) {
      std::vector<double> values;
      values.reserve(dset.size());
      for (const auto& [i, e] : dset) {
        values.push_back(e);
        e_of[i] = e;
      }
      try {
        const Gmm1D gmm = fit_gmm_1d(values, cfg.sep);
        std::vector<std::pair<int, double>> posts;
        posts.reserve(dset.size());
        for (const auto& [i, e] : dset) {
          const double w = posterior_old(gmm, e);
          w_of[i] = w;
          posts.emplace_back(i, w);
        }
        is_old = separate(n_cur, posts, cfg.sep.alpha);
      } catch (const GmmDegenerateInput&) {
        ++rep.gmm_fallbacks;
        std::cerr << "[ipll] task " << t + 1
                  << ": degenerate distance set, falling back to mean prototype"
                     " distance threshold\n";
        const double thr = mean_pairwise_prototype_distance(st.bank);
        for (const auto& [i, e] : dset) is_old[i] = e <= thr;
      }
    }
    int correct = 0;
    for (int i = 0; i < n_cur; ++i) {
      s_prime[i] = reallocate(cand[i], is_old[i], st.bank,
                              feats.row(i).transpose(), new_space, old_space);
      const bool truly_old = stream.class_intro_task[dt[i].true_label] < t;
      if (truly_old == is_old[i]) ++correct;
      rep.separation.push_back({t + 1, dt[i].id, e_of[i], w_of[i], is_old[i],
                                static_cast<int>(cand[i].size()),
                                static_cast<int>(s_prime[i].size())});
    }
    metrics.sep_acc = 100.0 * correct / n_cur;
  }

  std::vector<Vec> pseudo(n_cur);
  for (int i = 0; i < n_cur; ++i)
    pseudo[i] = init_pseudo(t > 0 && hooks.use_separation ? s_prime[i] : cand[i], c_now);

  std::vector<std::vector<int>> mem_cand(st.memory.size());
  for (std::size_t j = 0; j < st.memory.size(); ++j)
    mem_cand[j] = to_head(st.memory[j].sample.candidates);

  const int n_mem = hooks.use_memory ? static_cast<int>(st.memory.size()) : 0;
  const int n_all = n_cur + n_mem;
  auto item_features = [&](int i) -> const Vec& {
    return i < n_cur ? dt[i].features : st.memory[i - n_cur].sample.features;
  };
  auto item_cand = [&](int i) -> const std::vector<int>& {
    return i < n_cur ? cand[i] : mem_cand[i - n_cur];
  };
  auto item_zspace = [&](int i) -> const std::vector<int>& {
    if (cfg.argmax_space == ArgmaxSpace::Reallocated && i < n_cur) return s_prime[i];
    return item_cand(i);
  };
  auto item_pseudo = [&](int i) -> Vec& {
    return i < n_cur ? pseudo[i] : st.memory[i - n_cur].pseudo;
  };

  const Model* old_ptr = (t > 0 && st.snapshot) ? &*st.snapshot : nullptr;

  auto refresh_prototypes = [&]() {
    if (n_all == 0) return;
    Mat x_all(n_all, stream.feature_dim);
    std::vector<std::vector<int>> cand_all(n_all);
    for (int i = 0; i < n_all; ++i) {
      x_all.row(i) = item_features(i).transpose();
      cand_all[i] = item_cand(i);
    }
    update_prototypes(st.bank, assign_class_features(st.model, x_all, cand_all));
  };

  // Probe: the training objective on a fixed input batch, measured with
  // the pseudo-labels current at measurement time.
  const int probe_n = std::min(cfg.batch_size, n_all);
  Mat probe_x(probe_n, stream.feature_dim);
  for (int i = 0; i < probe_n; ++i) probe_x.row(i) = item_features(i).transpose();
  auto probe_loss = [&]() {
    Mat targets(probe_n, c_now);
    for (int i = 0; i < probe_n; ++i) targets.row(i) = item_pseudo(i).transpose();
    const TotalLossInputs probe{probe_x, probe_x, targets, old_ptr,
                                cfg.kd_temperature};
    return total_loss(st.model, probe).weighted(hooks.weights);
  };

  std::vector<BatchLosses> curve;
  std::vector<int> order(n_all);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double beta = beta_at(epoch, cfg.epochs, cfg.sep.beta_start, cfg.sep.beta_end);
    st.shuffle_rng.shuffle(order);
    BatchLosses sums;
    for (int start = 0; start < n_all; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n_all - start);
      Mat x(bs, stream.feature_dim);
      for (int r = 0; r < bs; ++r) x.row(r) = item_features(order[start + r]).transpose();
      const Mat xw = augment_batch(x, cfg.aug_sigma_weak, st.augment_rng);
      const Mat xs = augment_batch(x, cfg.aug_sigma_strong, st.augment_rng);

      // Pseudo-labels move before the gradient step, from the weak view.
      const Forward weak = st.model.forward(xw);
      for (int r = 0; r < bs; ++r) {
        const int gi = order[start + r];
        Vec& p = item_pseudo(gi);
        if (cfg.freeze_memory_labels && gi >= n_cur) {
          // stored label kept as-is
        } else if (!hooks.momentum_pseudo) {
          p = pseudo_from_model_output(weak.probs.row(r).transpose(), item_cand(gi));
        } else if (hooks.prototype_z) {
          int z = prototype_target(st.bank, weak.features.row(r).transpose(),
                                   item_zspace(gi));
          if (z < 0)
            z = argmax_restricted(weak.logits.row(r).transpose(), item_zspace(gi));
          update_pseudo(p, z, beta);
        } else {
          update_pseudo(p, weak.logits.row(r).transpose(), item_zspace(gi), beta);
        }
      }

      Mat targets(bs, c_now);
      for (int r = 0; r < bs; ++r) targets.row(r) = item_pseudo(order[start + r]).transpose();
      Gradients grad;
      const TotalLossInputs inputs{xw, xs, targets, old_ptr, cfg.kd_temperature};
      const BatchLosses bl = total_loss_grad(st.model, inputs, hooks.weights, grad);
      st.model.sgd_step(grad, cfg.lr, cfg.sgd_momentum);
      sums.ce += bl.ce * bs;
      sums.kd += bl.kd * bs;
      sums.cr += bl.cr * bs;
    }
    if (n_all > 0)
      curve.push_back({sums.ce / n_all, sums.kd / n_all, sums.cr / n_all});

    if (n_all > 0 && epoch == 0) metrics.probe_loss_first = probe_loss();
    if (n_all > 0 && epoch == cfg.epochs - 1) metrics.probe_loss_last = probe_loss();
    if (hooks.prototypes_every_epoch) refresh_prototypes();
  }
  if (!curve.empty()) {
    metrics.loss_ce = curve.back().ce;
    metrics.loss_kd = old_ptr != nullptr ? curve.back().kd : kNaN;
    metrics.loss_cr = curve.back().cr;
  }
  rep.loss_curves.push_back(curve);

  // End-of-task prototype update; under PP the last per-epoch refresh
  // already covered it.
  if (!hooks.prototypes_every_epoch || cfg.epochs == 0) refresh_prototypes();

  if (hooks.use_memory) {
    std::vector<const Sample*> cur_ptrs(n_cur);
    for (int i = 0; i < n_cur; ++i) cur_ptrs[i] = &dt[i];
    std::vector<const Sample*> mem_ptrs(st.memory.size());
    std::vector<Vec> mem_pseudo(st.memory.size());
    for (std::size_t j = 0; j < st.memory.size(); ++j) {
      mem_ptrs[j] = &st.memory[j].sample;
      mem_pseudo[j] = st.memory[j].pseudo;
    }
    const auto pool =
        build_pool(st.model, cur_ptrs, pseudo, cand, mem_ptrs, mem_pseudo, mem_cand);
    std::vector<int> seen_head(c_now);
    std::iota(seen_head.begin(), seen_head.end(), 0);
    const std::vector<int> budgets = budgets_for_head(hooks.mem.budget, st.head_classes);
    EpisodicMemory mem =
        hooks.random_memory
            ? rebuild_memory_random(pool, hooks.mem, seen_head, st.memrand_rng, budgets)
            : rebuild_memory(pool, st.bank, hooks.mem, seen_head, budgets);
    st.memory = std::move(mem.entries);
    for (const MemoryEntry& e : st.memory)
      rep.memory_dump.push_back({t + 1, st.head_classes[e.predicted_class],
                                 e.sample.id, e.kind, e.proto_dist, e.knn_score});
  }

  st.snapshot = st.model;
  rep.tasks.push_back(metrics);
}

EvalResult evaluate(const Model& model, const PrototypeBank& bank,
                    const std::vector<int>& head_classes,
                    const std::vector<const Sample*>& test, EvalMode mode,
                    const std::vector<int>& new_classes,
                    const std::vector<int>& old_classes) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  Mat x(test.size(), test.front()->features.size());
  for (std::size_t i = 0; i < test.size(); ++i) x.row(i) = test[i]->features.transpose();
  const Forward f = model.forward(x);
  std::vector<int> all_head(model.num_classes());
  std::iota(all_head.begin(), all_head.end(), 0);

  long n_all = 0, ok_all = 0, n_new = 0, ok_new = 0, n_old = 0, ok_old = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int pred_head =
        mode == EvalMode::Prototype
            ? classify_by_prototype(bank, f.features.row(i).transpose())
            : argmax_restricted(f.logits.row(i).transpose(), all_head);
    const bool ok = head_classes[pred_head] == test[i]->true_label;
    ++n_all;
    ok_all += ok;
    if (set_contains(new_classes, test[i]->true_label)) {
      ++n_new;
      ok_new += ok;
    }
    if (set_contains(old_classes, test[i]->true_label)) {
      ++n_old;
      ok_old += ok;
    }
  }
  EvalResult r;
  r.acc_all = 100.0 * ok_all / n_all;
  r.acc_new = n_new > 0 ? 100.0 * ok_new / n_new : kNaN;
  r.acc_old = n_old > 0 ? 100.0 * ok_old / n_old : kNaN;
  return r;
}

double average_incremental_accuracy(const std::vector<double>& accs) {
  if (accs.empty())
    throw std::invalid_argument("average_incremental_accuracy: empty input");
  return std::accumulate(accs.begin(), accs.end(), 0.0) /
         static_cast<double>(accs.size());
}

ExperimentResult run_stream(const TaskStream& stream, const PGDRConfig& config) {
  config.validate();
  const VariantHooks hooks = apply_variant(config.variant, config);
  TrainerState st(config);
  ExperimentReport rep;
  std::vector<double> accs;
  for (int t = 0; t < stream.num_tasks; ++t) {
    run_task(st, stream, t, config, hooks, rep);
    const auto test = stream.cumulative_test(t);
    const std::vector<int> y_new = stream.new_classes(t);
    const std::vector<int> y_old =
        t > 0 ? stream.label_space(t - 1) : std::vector<int>{};
    const EvalResult proto = evaluate(st.model, st.bank, st.head_classes, test,
                                      EvalMode::Prototype, y_new, y_old);
    const EvalResult lin = evaluate(st.model, st.bank, st.head_classes, test,
                                    EvalMode::Linear, y_new, y_old);
    const EvalResult& main = hooks.eval_mode == EvalMode::Prototype ? proto : lin;
    TaskMetrics& m = rep.tasks.back();
    m.acc_all = main.acc_all;
    m.acc_new = main.acc_new;
    m.acc_old = main.acc_old;
    m.acc_all_prototype = proto.acc_all;
    m.acc_all_linear = lin.acc_all;
    accs.push_back(m.acc_all);
  }
  rep.a_bar = average_incremental_accuracy(accs);
  return {std::move(rep), std::move(st.model), std::move(st.bank),
          std::move(st.head_classes)};
}

void write_metrics_csv(std::ostream& os, const ExperimentReport& report) {
  os << "task,acc_all,acc_new,acc_old,sep_acc,loss_ce,loss_kd,loss_cr\n";
  for (const TaskMetrics& m : report.tasks) {
    os << m.task << ',' << fmt10(m.acc_all) << ',' << fmt10(m.acc_new) << ','
       << fmt10(m.acc_old) << ',' << fmt10(m.sep_acc) << ',' << fmt10(m.loss_ce)
       << ',' << fmt10(m.loss_kd) << ',' << fmt10(m.loss_cr) << '\n';
  }
}

void write_separation_csv(std::ostream& os, const ExperimentReport& report) {
  os << "task,id,e,w,membership,s_size,s_prime_size\n";
  for (const SeparationRow& r : report.separation) {
    os << r.task << ',' << r.id << ',' << fmt10(r.e) << ',' << fmt10(r.w) << ','
       << (r.is_old ? "old" : "new") << ',' << r.s_size << ',' << r.s_prime_size
       << '\n';
  }
}

void write_memory_csv(std::ostream& os, const ExperimentReport& report) {
  os << "task,class,id,kind,proto_dist,knn_score\n";
  for (const MemoryRow& r : report.memory_dump) {
    os << r.task << ',' << r.cls << ',' << r.id << ',' << to_string(r.kind) << ','
       << fmt10(r.proto_dist) << ',' << fmt10(r.knn_score) << '\n';
  }
}

namespace {

void write_array(std::ostream& os, const char* name,
                 const Eigen::Ref<const Mat>& m) {
  os << "array " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << format_g17(m(i, j));
    }
    os << '\n';
  }
}

Mat read_array(std::istream& is, const std::string& expect_name) {
  std::string tag, name;
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> tag >> name >> rows >> cols) || tag != "array" || name != expect_name)
    throw std::runtime_error("checkpoint: expected array " + expect_name);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(is >> m(i, j))) throw std::runtime_error("checkpoint: truncated array");
  return m;
}

}  // namespace

void save_checkpoint(std::ostream& os, const Model& model, const PrototypeBank& bank,
                     const std::vector<int>& head_classes) {
  os << "#ipll-checkpoint\n";
  os << "activation " << to_string(model.activation()) << '\n';
  os << "gamma " << format_g17(bank.gamma) << '\n';
  os << "head_classes " << head_classes.size();
  for (int c : head_classes) os << ' ' << c;
  os << '\n';
  write_array(os, "input_mean", model.input_mean().transpose());
  os << "input_scale " << format_g17(model.input_scale()) << '\n';
  write_array(os, "w1", model.w1());
  write_array(os, "b1", model.b1().transpose());
  write_array(os, "w2", model.w2());
  write_array(os, "b2", model.b2().transpose());
  write_array(os, "vel_w1", model.vel_w1());
  write_array(os, "vel_b1", model.vel_b1().transpose());
  write_array(os, "vel_w2", model.vel_w2());
  write_array(os, "vel_b2", model.vel_b2().transpose());
  write_array(os, "prototypes", bank.prototypes);
  os << "initialized " << bank.initialized.size();
  for (char f : bank.initialized) os << ' ' << static_cast<int>(f);
  os << '\n';
}

Checkpoint load_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "#ipll-checkpoint")
    throw std::runtime_error("checkpoint: bad magic");
  std::string key, act_name;
  if (!(is >> key >> act_name) || key != "activation")
    throw std::runtime_error("checkpoint: missing activation");
  double gamma = 0.0;
  if (!(is >> key >> gamma) || key != "gamma")
    throw std::runtime_error("checkpoint: missing gamma");
  std::size_t n_head = 0;
  if (!(is >> key >> n_head) || key != "head_classes")
    throw std::runtime_error("checkpoint: missing head_classes");
  Checkpoint ck;
  ck.head_classes.resize(n_head);
  for (std::size_t i = 0; i < n_head; ++i)
    if (!(is >> ck.head_classes[i])) throw std::runtime_error("checkpoint: truncated");

  const Mat input_mean = read_array(is, "input_mean");
  double input_scale = 1.0;
  if (!(is >> key >> input_scale) || key != "input_scale")
    throw std::runtime_error("checkpoint: missing input_scale");
  const Mat w1 = read_array(is, "w1");
  const Mat b1 = read_array(is, "b1");
  const Mat w2 = read_array(is, "w2");
  const Mat b2 = read_array(is, "b2");
  const Mat vw1 = read_array(is, "vel_w1");
  const Mat vb1 = read_array(is, "vel_b1");
  const Mat vw2 = read_array(is, "vel_w2");
  const Mat vb2 = read_array(is, "vel_b2");
  const Mat protos = read_array(is, "prototypes");

  Rng scratch(0);
  ck.model = Model(static_cast<int>(w1.cols()), static_cast<int>(w1.rows()),
                   static_cast<int>(w2.rows()), activation_from_string(act_name),
                   scratch);
  ck.model.w1() = w1;
  ck.model.b1() = b1.transpose();
  ck.model.w2() = w2;
  ck.model.b2() = b2.transpose();
  ck.model.vel_w1() = vw1;
  ck.model.vel_b1() = vb1.transpose();
  ck.model.vel_w2() = vw2;
  ck.model.vel_b2() = vb2.transpose();
  ck.model.set_input_standardization(input_mean.transpose(), input_scale);

  ck.bank.gamma = gamma;
  ck.bank.prototypes = protos;
  std::size_t n_init = 0;
  if (!(is >> key >> n_init) || key != "initialized")
    throw std::runtime_error("checkpoint: missing initialized flags");
  ck.bank.initialized.resize(n_init);
  for (std::size_t i = 0; i < n_init; ++i) {
    int v = 0;
    if (!(is >> v)) throw std::runtime_error("checkpoint: truncated flags");
    ck.bank.initialized[i] = static_cast<char>(v);
  }
  return ck;
}

ExperimentResult run_to_dir(const TaskStream& stream, const PGDRConfig& config,
                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  ExperimentResult result = run_stream(stream, config);
  {
    std::ofstream os(fs::path(out_dir) / "metrics.csv", std::ios::binary);
    write_metrics_csv(os, result.report);
  }
  {
    std::ofstream os(fs::path(out_dir) / "separation.csv", std::ios::binary);
    write_separation_csv(os, result.report);
  }
  {
    std::ofstream os(fs::path(out_dir) / "memory.csv", std::ios::binary);
    write_memory_csv(os, result.report);
  }
  {
    std::ofstream os(fs::path(out_dir) / "checkpoint.txt", std::ios::binary);
    save_checkpoint(os, result.model, result.bank, result.head_classes);
  }
  return result;
}

namespace {

struct ParsedMetrics {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

ParsedMetrics parse_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  ParsedMetrics out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty metrics file: " + path);
  {
    std::istringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) out.header.push_back(tok);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace

void aggregate_report_dir(const std::string& in_dir) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, ParsedMetrics>> runs;
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(in_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv"))
      subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& dir : subdirs)
    runs.emplace_back(dir.filename().string(),
                      parse_metrics_csv((dir / "metrics.csv").string()));
  if (fs::exists(fs::path(in_dir) / "metrics.csv"))
    runs.emplace_back(".", parse_metrics_csv((fs::path(in_dir) / "metrics.csv").string()));
  if (runs.empty())
    throw std::runtime_error("no metrics.csv found under " + in_dir);

  std::ofstream summary(fs::path(in_dir) / "summary.csv", std::ios::binary);
  summary << "variant,a_bar,final_acc_all,final_acc_new,final_acc_old,mean_sep_acc\n";
  std::ofstream longfile(fs::path(in_dir) / "long.csv", std::ios::binary);
  longfile << "variant,task,metric,value\n";
  for (const auto& [variant, pm] : runs) {
    double acc_sum = 0.0, sep_sum = 0.0;
    int sep_count = 0;
    for (const auto& row : pm.rows) {
      acc_sum += row[1];
      if (!std::isnan(row[4])) {
        sep_sum += row[4];
        ++sep_count;
      }
      for (std::size_t c = 1; c < pm.header.size(); ++c)
        longfile << variant << ',' << static_cast<int>(row[0]) << ','
                 << pm.header[c] << ',' << fmt10(row[c]) << '\n';
    }
    const auto& last = pm.rows.back();
    summary << variant << ',' << fmt10(acc_sum / pm.rows.size()) << ','
            << fmt10(last[1]) << ',' << fmt10(last[2]) << ',' << fmt10(last[3])
            << ',' << fmt10(sep_count ? sep_sum / sep_count : kNaN) << '\n';
  }
}

}  // namespace ipll
