#pragma once

#include "ipll/math.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ipll {

struct DatasetSpec {
  int num_classes = 10;
  int feature_dim = 16;
  int samples_per_class = 100;
  double cluster_separation = 10.0;  // minimum pairwise distance between class means
  double cluster_stddev = 0.5;
  std::uint64_t seed = 1;
};

/// One sample of the stream.  `true_label` is hidden from the learner and
/// only consulted by the generator and the evaluation code.
struct Sample {
  int id = -1;
  Vec features;
  int true_label = -1;
  std::vector<int> candidates;  // sorted; empty for test samples
  int task = -1;                // task where the sample appears in the stream
};

struct LabeledDataset {
  int num_classes = 0;
  int feature_dim = 0;
  Mat class_means;  // num_classes x feature_dim
  std::vector<Sample> train;
  std::vector<Sample> test;
};

enum class FlipMode { Uniform, NonUniform };

struct StreamSpec {
  int num_tasks = 5;
  int blurry_w = 90;  // W: percent of a class's samples placed in its intro task
  double flip_q = 0.3;
  FlipMode flip_mode = FlipMode::Uniform;
  std::uint64_t seed = 1;
};

struct TaskStream {
  int num_classes = 0;
  int feature_dim = 0;
  int num_tasks = 0;
  double flip_q = 0.0;
  int blurry_w = 100;
  std::uint64_t seed = 0;
  std::vector<std::vector<Sample>> train;  // per task
  std::vector<Sample> test;                // task field = intro task of the class
  std::vector<int> class_intro_task;       // size num_classes

  /// Classes introduced at task t (sorted).
  std::vector<int> new_classes(int t) const;
  /// Cumulative label space Y_t (sorted).
  std::vector<int> label_space(int t) const;
  /// Test samples whose class is in Y_t.
  std::vector<const Sample*> cumulative_test(int t) const;
};

/// Isotropic Gaussian clusters with rejection-sampled means.  Test samples
/// come from the same class distributions under a disjoint sub-seed.
LabeledDataset make_gaussian_dataset(const DatasetSpec& spec);

/// Candidate set for true label y: y plus each other label of `label_space`
/// independently with probability q.
std::vector<int> flip_uniform(int y, const std::vector<int>& label_space,
                              double q, Rng& rng);

/// Candidate set drawn from a flip matrix: label j enters with probability
/// matrix(y, j); the diagonal must be 1 so y itself is always kept.
std::vector<int> flip_nonuniform(int y, const Eigen::Ref<const Mat>& matrix,
                                 Rng& rng);

/// Banded matrix from the non-uniform generation protocol: the five bands
/// below the diagonal carry 0.5, 0.4, 0.3, 0.2, 0.1; everything else is 0
/// except the unit diagonal.
Mat default_flip_matrix(int num_classes);

/// Splits the dataset into a (100-W)-blurry task stream and attaches
/// candidate sets generated against each placement task's label space.
TaskStream build_blurry_stream(const LabeledDataset& dataset,
                               const StreamSpec& spec);

// Stream file format: a header line followed by one record per line,
//   id<TAB>task<TAB>true_label<TAB>cand1;cand2;...<TAB>f1,f2,...,fd
// Test records carry an empty candidate field.  Floats are serialized with
// 17 significant digits so write -> read -> write is byte-identical.
void write_stream(std::ostream& os, const TaskStream& stream);
void write_stream_file(const std::string& path, const TaskStream& stream);
TaskStream read_stream(std::istream& is);
TaskStream read_stream_file(const std::string& path);

/// printf %.17g, the round-trip-exact float serialization used in all
/// file formats.
std::string format_g17(double v);

}  // namespace ipll
