#pragma once

#include "ipll/datagen.hpp"
#include "ipll/disambiguation.hpp"
#include "ipll/math.hpp"
#include "ipll/memory.hpp"
#include "ipll/model.hpp"
#include "ipll/prototypes.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ipll {

enum class Variant {
  PGDR,
  MP,              // PRODEN-style pseudo-labels: masked, renormalized model output
  PP,              // PiCO-style: prototype predictions drive the label momentum
  NoMemory,
  RandomMemory,
  DistanceMemory,  // representatives only
  LinearEval,
  NoCr,
  NoKd,
};

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

enum class EvalMode { Prototype, Linear };
enum class ArgmaxSpace { Original, Reallocated };

struct PGDRConfig {
  int epochs = 30;
  int batch_size = 64;
  double lr = 0.05;
  double sgd_momentum = 0.9;
  LossWeights weights;
  SeparationConfig sep;
  MemoryConfig mem;
  double gamma = 0.5;  // prototype momentum
  Variant variant = Variant::PGDR;
  std::uint64_t seed = 1;
  EvalMode eval_classifier = EvalMode::Prototype;
  int hidden_dim = 32;
  Activation activation = Activation::Tanh;
  double aug_sigma_weak = 0.025;   // 0.05 x the desk cluster stddev of 0.5
  double aug_sigma_strong = 0.1;   // 0.2 x the same
  double kd_temperature = 1.0;
  ArgmaxSpace argmax_space = ArgmaxSpace::Original;
  bool freeze_memory_labels = false;

  void validate() const;
};

/// Variant tag resolved into concrete pipeline switches.
struct VariantHooks {
  bool use_separation = true;
  bool momentum_pseudo = true;   // false: pseudo = masked renormalized model output
  bool prototype_z = false;      // momentum target from nearest candidate prototype
  bool prototypes_every_epoch = false;
  bool use_memory = true;
  bool random_memory = false;
  LossWeights weights;
  MemoryConfig mem;
  EvalMode eval_mode = EvalMode::Prototype;
};

VariantHooks apply_variant(Variant tag, const PGDRConfig& config);

struct TaskMetrics {
  int task = 0;  // 1-based in reports and files
  double acc_all = 0.0, acc_new = 0.0, acc_old = 0.0;  // percent
  double sep_acc = 0.0;   // nan when no separation ran
  double loss_ce = 0.0, loss_kd = 0.0, loss_cr = 0.0;  // final-epoch means
  double acc_all_prototype = 0.0, acc_all_linear = 0.0;
  double probe_loss_first = 0.0, probe_loss_last = 0.0;
};

struct SeparationRow {
  int task = 0, id = 0;
  double e = 0.0, w = 0.0;
  bool is_old = false;
  int s_size = 0, s_prime_size = 0;
};

struct MemoryRow {
  int task = 0, cls = 0, id = 0;
  MemoryKind kind = MemoryKind::Representative;
  double proto_dist = 0.0, knn_score = 0.0;
};

struct ExperimentReport {
  std::vector<TaskMetrics> tasks;
  double a_bar = 0.0;  // mean of acc_all under the configured eval mode
  std::vector<std::vector<BatchLosses>> loss_curves;  // per task, per epoch
  std::vector<SeparationRow> separation;
  std::vector<MemoryRow> memory_dump;
  int gmm_fallbacks = 0;
};

/// Mutable experiment state threaded through run_task.
struct TrainerState {
  Model model;
  std::optional<Model> snapshot;  // f_old, frozen at each task boundary
  PrototypeBank bank;
  std::vector<MemoryEntry> memory;
  std::vector<int> head_classes;  // head row -> global class id
  Rng init_rng, shuffle_rng, augment_rng, memrand_rng;

  explicit TrainerState(const PGDRConfig& config);
};

/// Fresh model for the first task.  The encoder's affine layer starts as
/// a standardizing map: weights drawn from the uniform fan-in
/// distribution are scaled by the first task's global feature stddev and
/// the bias cancels the feature mean, so pre-activations begin at unit
/// scale regardless of the raw feature range.
Model initial_model(const TaskStream& stream, const PGDRConfig& config,
                    Rng& init_rng);

/// One pass of the training loop for task t (0-based): head growth,
/// separation + re-allocation, the epoch loop, prototype update, memory
/// rebuild, and the f_old snapshot.
void run_task(TrainerState& state, const TaskStream& stream, int t,
              const PGDRConfig& config, const VariantHooks& hooks,
              ExperimentReport& report);

struct EvalResult {
  double acc_all = 0.0, acc_new = 0.0, acc_old = 0.0;  // percent
};

EvalResult evaluate(const Model& model, const PrototypeBank& bank,
                    const std::vector<int>& head_classes,
                    const std::vector<const Sample*>& test, EvalMode mode,
                    const std::vector<int>& new_classes,
                    const std::vector<int>& old_classes);

double average_incremental_accuracy(const std::vector<double>& accs);

struct ExperimentResult {
  ExperimentReport report;
  Model model;
  PrototypeBank bank;
  std::vector<int> head_classes;
};

ExperimentResult run_stream(const TaskStream& stream, const PGDRConfig& config);

// ---- run artifacts -------------------------------------------------------

void write_metrics_csv(std::ostream& os, const ExperimentReport& report);
void write_separation_csv(std::ostream& os, const ExperimentReport& report);
void write_memory_csv(std::ostream& os, const ExperimentReport& report);

/// Experiment checkpoint: model parameters, momentum buffers, the head
/// class map, and the prototype bank; text arrays with shape headers,
/// floats at 17 significant digits.
void save_checkpoint(std::ostream& os, const Model& model, const PrototypeBank& bank,
                     const std::vector<int>& head_classes);
struct Checkpoint {
  Model model;
  PrototypeBank bank;
  std::vector<int> head_classes;
};
Checkpoint load_checkpoint(std::istream& is);

/// Trains one variant and writes metrics.csv, separation.csv, memory.csv
/// and checkpoint.txt under out_dir (created if missing).
ExperimentResult run_to_dir(const TaskStream& stream, const PGDRConfig& config,
                            const std::string& out_dir);

/// Aggregates per-variant run directories (out_dir/<variant>/metrics.csv)
/// into summary.csv and a long-format long.csv under in_dir.
void aggregate_report_dir(const std::string& in_dir);

}  // namespace ipll
