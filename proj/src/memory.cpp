#include "ipll/memory.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace ipll {

std::string to_string(MemoryKind k) {
  switch (k) {
    case MemoryKind::Representative: return "representative";
    case MemoryKind::Diverse: return "diverse";
    case MemoryKind::Random: return "random";
  }
  return "?";
}

std::vector<PoolItem> build_pool(const Model& model,
                                 const std::vector<const Sample*>& current,
                                 const std::vector<Vec>& current_pseudo,
                                 const std::vector<std::vector<int>>& current_cands,
                                 const std::vector<const Sample*>& memory,
                                 const std::vector<Vec>& memory_pseudo,
                                 const std::vector<std::vector<int>>& memory_cands) {
  if (current.size() != current_pseudo.size() || current.size() != current_cands.size() ||
      memory.size() != memory_pseudo.size() || memory.size() != memory_cands.size())
    throw std::invalid_argument("build_pool: aligned input sizes required");
  std::vector<PoolItem> pool;
  pool.reserve(current.size() + memory.size());
  std::unordered_set<int> ids;
  auto add = [&](const Sample* s, const Vec& pseudo, const std::vector<int>& cand) {
    if (!ids.insert(s->id).second)
      throw std::logic_error("build_pool: duplicate sample id");
    PoolItem item;
    item.sample = s;
    item.pseudo = pseudo;
    Vec logits, probs;
    model.forward_one(s->features, item.feature, logits, probs);
    item.predicted_class = argmax_restricted(logits, cand);
    pool.push_back(std::move(item));
  };
  for (std::size_t i = 0; i < current.size(); ++i)
    add(current[i], current_pseudo[i], current_cands[i]);
  for (std::size_t i = 0; i < memory.size(); ++i)
    add(memory[i], memory_pseudo[i], memory_cands[i]);
  return pool;
}

namespace {

// Indices of the (up to) k nearest other rows, ordered by (distance, index).
std::vector<int> nearest_others(const Eigen::Ref<const Mat>& features, int i, int k) {
  const int n = static_cast<int>(features.rows());
  std::vector<std::pair<double, int>> dist;
  dist.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    dist.emplace_back((features.row(i) - features.row(j)).norm(), j);
  }
  const int kk = std::min<int>(k, static_cast<int>(dist.size()));
  std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
  std::vector<int> out(kk);
  for (int t = 0; t < kk; ++t) out[t] = dist[t].second;
  return out;
}

}  // namespace

std::vector<double> knn_scores(const Eigen::Ref<const Mat>& features, int k) {
  if (k < 1) throw std::invalid_argument("knn_scores: k >= 1");
  const int n = static_cast<int>(features.rows());
  std::vector<double> scores(n, 0.0);
  if (n < 2) return scores;
  for (int i = 0; i < n; ++i) {
    for (int j : nearest_others(features, i, k))
      scores[i] += (features.row(i) - features.row(j)).norm();
  }
  return scores;
}

std::vector<std::vector<int>> knn_neighborhoods(const Eigen::Ref<const Mat>& features,
                                                int k) {
  const int n = static_cast<int>(features.rows());
  std::vector<std::vector<int>> out(n);
  if (n < 2) return out;
  for (int i = 0; i < n; ++i) out[i] = nearest_others(features, i, k);
  return out;
}

std::vector<int> select_diverse(const std::vector<double>& scores,
                                const std::vector<std::vector<int>>& neighborhoods,
                                int max_picks) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] < scores[b]; });
  std::vector<bool> blocked(n, false);  // inside a selected sample's neighborhood
  std::vector<bool> taken(n, false);
  std::vector<int> picks;
  while (static_cast<int>(picks.size()) < max_picks) {
    int chosen = -1;
    for (int idx : order) {
      if (!taken[idx] && !blocked[idx]) { chosen = idx; break; }
    }
    if (chosen < 0) break;
    taken[chosen] = true;
    picks.push_back(chosen);
    for (int j : neighborhoods[chosen]) blocked[j] = true;
  }
  return picks;
}

std::vector<int> select_representative(const Eigen::Ref<const Mat>& features,
                                       const Eigen::Ref<const Vec>& prototype,
                                       int count,
                                       const std::vector<bool>& excluded) {
  const int n = static_cast<int>(features.rows());
  std::vector<std::pair<double, int>> dist;
  dist.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    dist.emplace_back((features.row(i).transpose() - prototype).norm(), i);
  }
  std::sort(dist.begin(), dist.end());
  const int take = std::min<int>(count, static_cast<int>(dist.size()));
  std::vector<int> out(std::max(take, 0));
  for (int t = 0; t < take; ++t) out[t] = dist[t].second;
  return out;
}

std::vector<int> per_class_budgets(int budget, const std::vector<int>& seen_classes) {
  const int num = static_cast<int>(seen_classes.size());
  if (num == 0) throw std::invalid_argument("per_class_budgets: no classes");
  if (budget < num)
    throw std::invalid_argument("per_class_budgets: budget below one slot per class");
  std::vector<int> budgets(num, budget / num);
  const int rem = budget % num;
  for (int i = 0; i < rem; ++i) budgets[i] += 1;  // seen_classes is sorted ascending
  return budgets;
}

EpisodicMemory rebuild_memory(const std::vector<PoolItem>& pool,
                              const PrototypeBank& bank,
                              const MemoryConfig& config,
                              const std::vector<int>& seen_classes,
                              const std::vector<int>& budgets_in) {
  const std::vector<int> budgets = budgets_in.empty()
      ? per_class_budgets(config.budget, seen_classes)
      : budgets_in;
  if (budgets.size() != seen_classes.size())
    throw std::invalid_argument("rebuild_memory: budgets misaligned");

  // Group pool indices by predicted class, preserving pool order.
  std::vector<std::vector<int>> groups;
  groups.resize(seen_classes.size());
  for (int p = 0; p < static_cast<int>(pool.size()); ++p) {
    const auto it = std::lower_bound(seen_classes.begin(), seen_classes.end(),
                                     pool[p].predicted_class);
    if (it == seen_classes.end() || *it != pool[p].predicted_class)
      throw std::logic_error("rebuild_memory: predicted class outside label space");
    groups[it - seen_classes.begin()].push_back(p);
  }

  EpisodicMemory mem;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& idx = groups[g];
    if (idx.empty()) continue;
    const int cls = seen_classes[g];
    if (!bank.initialized[cls])
      throw std::logic_error("rebuild_memory: missing prototype for a non-empty group");
    const int b_c = budgets[g];

    Mat feats(idx.size(), bank.prototypes.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
      feats.row(r) = pool[idx[r]].feature.transpose();

    const std::vector<double> scores = knn_scores(feats, config.k_neighbors);
    const auto hoods = knn_neighborhoods(feats, config.k_neighbors);
    const int n_d = static_cast<int>(config.diverse_fraction * b_c);
    const std::vector<int> diverse = select_diverse(scores, hoods, n_d);

    std::vector<bool> excluded(idx.size(), false);
    for (int i : diverse) excluded[i] = true;
    const int n_r = b_c - static_cast<int>(diverse.size());
    const std::vector<int> reps = select_representative(
        feats, bank.prototypes.row(cls).transpose(), n_r, excluded);

    auto store = [&](int local, MemoryKind kind) {
      const PoolItem& item = pool[idx[local]];
      MemoryEntry e;
      e.sample = *item.sample;
      e.pseudo = item.pseudo;
      e.predicted_class = cls;
      e.kind = kind;
      e.proto_dist =
          (feats.row(local).transpose() - bank.prototypes.row(cls).transpose()).norm();
      e.knn_score = scores[local];
      mem.entries.push_back(std::move(e));
    };
    for (int i : diverse) store(i, MemoryKind::Diverse);
    for (int i : reps) store(i, MemoryKind::Representative);
  }
  return mem;
}

EpisodicMemory rebuild_memory_random(const std::vector<PoolItem>& pool,
                                     const MemoryConfig& config,
                                     const std::vector<int>& seen_classes,
                                     Rng& rng,
                                     const std::vector<int>& budgets_in) {
  const std::vector<int> budgets = budgets_in.empty()
      ? per_class_budgets(config.budget, seen_classes)
      : budgets_in;
  if (budgets.size() != seen_classes.size())
    throw std::invalid_argument("rebuild_memory_random: budgets misaligned");
  std::vector<std::vector<int>> groups(seen_classes.size());
  for (int p = 0; p < static_cast<int>(pool.size()); ++p) {
    const auto it = std::lower_bound(seen_classes.begin(), seen_classes.end(),
                                     pool[p].predicted_class);
    if (it == seen_classes.end() || *it != pool[p].predicted_class)
      throw std::logic_error("rebuild_memory_random: predicted class outside label space");
    groups[it - seen_classes.begin()].push_back(p);
  }
  EpisodicMemory mem;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto idx = groups[g];
    if (idx.empty()) continue;
    rng.shuffle(idx);
    const int take = std::min<int>(budgets[g], static_cast<int>(idx.size()));
    for (int t = 0; t < take; ++t) {
      const PoolItem& item = pool[idx[t]];
      MemoryEntry e;
      e.sample = *item.sample;
      e.pseudo = item.pseudo;
      e.predicted_class = seen_classes[g];
      e.kind = MemoryKind::Random;
      e.proto_dist = std::numeric_limits<double>::quiet_NaN();
      e.knn_score = std::numeric_limits<double>::quiet_NaN();
      mem.entries.push_back(std::move(e));
    }
  }
  return mem;
}

}  // namespace ipll
