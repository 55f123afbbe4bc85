#pragma once

#include "ipll/datagen.hpp"
#include "ipll/math.hpp"
#include "ipll/model.hpp"
#include "ipll/prototypes.hpp"

#include <string>
#include <vector>

namespace ipll {

struct MemoryConfig {
  int budget = 2000;             // m
  int k_neighbors = 10;          // K
  double diverse_fraction = 0.67;  // share of each class budget spent on diverse picks
};

enum class MemoryKind { Representative, Diverse, Random };

std::string to_string(MemoryKind k);

/// One stored sample together with the pseudo-label it trained under and
/// selection bookkeeping for the memory dump.
struct MemoryEntry {
  Sample sample;
  Vec pseudo;
  int predicted_class = -1;
  MemoryKind kind = MemoryKind::Representative;
  double proto_dist = 0.0;
  double knn_score = 0.0;
};

struct EpisodicMemory {
  std::vector<MemoryEntry> entries;
};

/// A candidate for storage: the sample, its current pseudo-label, and the
/// classifier's candidate-restricted prediction.
struct PoolItem {
  const Sample* sample = nullptr;
  Vec pseudo;
  Vec feature;  // phi(x)
  int predicted_class = -1;
};

/// D'_t = D_t plus the previous memory, grouped by predicted class.
/// Candidate sets align with the sample lists; sample ids must be unique
/// across the pool.
std::vector<PoolItem> build_pool(const Model& model,
                                 const std::vector<const Sample*>& current,
                                 const std::vector<Vec>& current_pseudo,
                                 const std::vector<std::vector<int>>& current_cands,
                                 const std::vector<const Sample*>& memory,
                                 const std::vector<Vec>& memory_pseudo,
                                 const std::vector<std::vector<int>>& memory_cands);

/// a_i = sum of distances to the K nearest other samples in the group
/// (K clamps to group size - 1; singleton groups score 0).
std::vector<double> knn_scores(const Eigen::Ref<const Mat>& features, int k);

/// Neighbor index lists N_K(x), rank ties broken by index, frozen for the
/// duration of a selection pass.
std::vector<std::vector<int>> knn_neighborhoods(const Eigen::Ref<const Mat>& features,
                                                int k);

/// Greedy diverse pick: repeatedly take the unselected sample with the
/// smallest a_i that lies in no already-selected sample's neighborhood.
/// May return fewer than max_picks.
std::vector<int> select_diverse(const std::vector<double>& scores,
                                const std::vector<std::vector<int>>& neighborhoods,
                                int max_picks);

/// The `count` unexcluded samples closest to the prototype, ties by index.
std::vector<int> select_representative(const Eigen::Ref<const Mat>& features,
                                       const Eigen::Ref<const Vec>& prototype,
                                       int count,
                                       const std::vector<bool>& excluded);

/// Per-class budgets: floor(m / num_seen) with the remainder handed to the
/// lowest-index seen classes.
std::vector<int> per_class_budgets(int budget, const std::vector<int>& seen_classes);

/// Full rebuild: per class, diverse picks first, then representatives to
/// fill the class budget.  `budgets`, when given, overrides the per-class
/// budgets (aligned with seen_classes); the trainer uses this to hand the
/// remainder slots to the lowest class ids rather than the lowest head rows.
EpisodicMemory rebuild_memory(const std::vector<PoolItem>& pool,
                              const PrototypeBank& bank,
                              const MemoryConfig& config,
                              const std::vector<int>& seen_classes,
                              const std::vector<int>& budgets = {});

/// Ablation selector: uniform per-class picks without replacement, same
/// budgets as rebuild_memory.
EpisodicMemory rebuild_memory_random(const std::vector<PoolItem>& pool,
                                     const MemoryConfig& config,
                                     const std::vector<int>& seen_classes,
                                     Rng& rng,
                                     const std::vector<int>& budgets = {});

}  // namespace ipll
