#include "ipll/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ipll {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int> TaskStream::new_classes(int t) const {
  std::vector<int> out;
  for (int c = 0; c < num_classes; ++c)
    if (class_intro_task[c] == t) out.push_back(c);
  return out;
}

std::vector<int> TaskStream::label_space(int t) const {
  std::vector<int> out;
  for (int c = 0; c < num_classes; ++c)
    if (class_intro_task[c] <= t) out.push_back(c);
  return out;
}

std::vector<const Sample*> TaskStream::cumulative_test(int t) const {
  std::vector<const Sample*> out;
  for (const Sample& s : test)
    if (class_intro_task[s.true_label] <= t) out.push_back(&s);
  return out;
}

LabeledDataset make_gaussian_dataset(const DatasetSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("dataset: num_classes >= 2");
  if (spec.feature_dim < 1 || spec.samples_per_class < 1 ||
      spec.cluster_separation <= 0 || spec.cluster_stddev <= 0)
    throw std::invalid_argument("dataset: invalid spec");

  const int C = spec.num_classes;
  const int d = spec.feature_dim;
  Rng base(spec.seed);

  // Means drawn uniformly in a box of side 8x the separation; rejection
  // keeps only candidates at least cluster_separation away from every
  // accepted mean.  Low feature_dim caps how many classes fit (about
  // (8)^d sphere radii), which is what the attempt bound reports.
  const double box = spec.cluster_separation * 8.0;
  Rng mean_rng = base.derive("dataset-means");
  Mat means(C, d);
  const int max_attempts = 1000 * C;
  int attempts = 0;
  for (int c = 0; c < C;) {
    if (++attempts > max_attempts)
      throw std::runtime_error(
          "make_gaussian_dataset: mean rejection sampling exhausted; "
          "separation infeasible for this (C, d)");
    Vec candidate(d);
    for (int k = 0; k < d; ++k) candidate[k] = mean_rng.uniform(0.0, box);
    bool ok = true;
    for (int p = 0; p < c && ok; ++p)
      ok = l2_distance(candidate, means.row(p).transpose()) >= spec.cluster_separation;
    if (ok) means.row(c++) = candidate.transpose();
  }

  LabeledDataset ds;
  ds.num_classes = C;
  ds.feature_dim = d;
  ds.class_means = means;

  Rng train_rng = base.derive("dataset-train-noise");
  Rng test_rng = base.derive("dataset-test-noise");
  int next_id = 0;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Sample s;
      s.id = next_id++;
      s.true_label = c;
      s.features = means.row(c).transpose() + spec.cluster_stddev * train_rng.normal_vec(d);
      ds.train.push_back(std::move(s));
    }
  }
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Sample s;
      s.id = next_id++;
      s.true_label = c;
      s.features = means.row(c).transpose() + spec.cluster_stddev * test_rng.normal_vec(d);
      ds.test.push_back(std::move(s));
    }
  }
  return ds;
}

std::vector<int> flip_uniform(int y, const std::vector<int>& label_space,
                              double q, Rng& rng) {
  if (!set_contains(label_space, y))
    throw std::invalid_argument("flip_uniform: y not in label space");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("flip_uniform: q in [0,1]");
  std::vector<int> s;
  for (int j : label_space) {
    if (j == y) {
      s.push_back(j);
    } else if (rng.uniform() < q) {
      s.push_back(j);
    }
  }
  return s;  // label_space is sorted, so s is sorted
}

std::vector<int> flip_nonuniform(int y, const Eigen::Ref<const Mat>& matrix,
                                 Rng& rng) {
  const int n = static_cast<int>(matrix.rows());
  if (matrix.cols() != n || y < 0 || y >= n)
    throw std::invalid_argument("flip_nonuniform: bad matrix or label");
  for (int c = 0; c < n; ++c)
    if (matrix(c, c) != 1.0)
      throw std::invalid_argument("flip_nonuniform: matrix diagonal must be 1");
  std::vector<int> s;
  for (int j = 0; j < n; ++j) {
    const double p = matrix(y, j);
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("flip_nonuniform: entries must be in [0,1]");
    if (j == y || (p > 0.0 && rng.uniform() < p)) s.push_back(j);
  }
  return s;
}

Mat default_flip_matrix(int num_classes) {
  Mat m = Mat::Zero(num_classes, num_classes);
  for (int y = 0; y < num_classes; ++y) {
    m(y, y) = 1.0;
    for (int band = 1; band <= 5 && y - band >= 0; ++band)
      m(y, y - band) = 0.6 - 0.1 * band;
  }
  return m;
}

TaskStream build_blurry_stream(const LabeledDataset& dataset,
                               const StreamSpec& spec) {
  if (spec.num_tasks < 1) throw std::invalid_argument("stream: num_tasks >= 1");
  if (spec.blurry_w < 0 || spec.blurry_w > 100)
    throw std::invalid_argument("stream: W in [0,100]");
  const int C = dataset.num_classes;
  const int T = spec.num_tasks;
  Rng base(spec.seed);

  // Random even class partition; remainder classes land in the earliest tasks.
  std::vector<int> order(C);
  std::iota(order.begin(), order.end(), 0);
  Rng part_rng = base.derive("class-partition");
  part_rng.shuffle(order);
  std::vector<int> intro(C, 0);
  {
    const int q = C / T, r = C % T;
    int pos = 0;
    for (int t = 0; t < T; ++t) {
      const int take = q + (t < r ? 1 : 0);
      for (int k = 0; k < take; ++k) intro[order[pos++]] = t;
    }
  }

  TaskStream stream;
  stream.num_classes = C;
  stream.feature_dim = dataset.feature_dim;
  stream.num_tasks = T;
  stream.flip_q = spec.flip_q;
  stream.blurry_w = spec.blurry_w;
  stream.seed = spec.seed;
  stream.class_intro_task = intro;
  stream.train.resize(T);

  // Group train samples by class, keeping generation order.
  std::vector<std::vector<const Sample*>> by_class(C);
  for (const Sample& s : dataset.train) by_class[s.true_label].push_back(&s);

  Rng spread_rng = base.derive("blurry-spread");
  std::vector<std::pair<const Sample*, int>> placements;  // (sample, task)
  for (int c = 0; c < C; ++c) {
    auto group = by_class[c];
    spread_rng.shuffle(group);
    const int t0 = intro[c];
    const int n = static_cast<int>(group.size());
    int home = (t0 == T - 1) ? n : (n * spec.blurry_w) / 100;
    int idx = 0;
    for (; idx < home; ++idx) placements.emplace_back(group[idx], t0);
    const int rest = n - home;
    const int later = T - 1 - t0;
    if (rest > 0) {
      // Uniform spread over tasks t0+1..T-1; the integer-division remainder
      // goes to the earliest subsequent tasks, one extra sample each.
      const int per = rest / later, rem = rest % later;
      for (int k = 0; k < later; ++k) {
        const int count = per + (k < rem ? 1 : 0);
        for (int j = 0; j < count; ++j)
          placements.emplace_back(group[idx++], t0 + 1 + k);
      }
    }
  }

  // Candidate sets are generated against the placement task's label space.
  Rng flip_rng = base.derive("flip");
  const Mat flip_matrix = spec.flip_mode == FlipMode::NonUniform
                              ? default_flip_matrix(C)
                              : Mat();
  std::sort(placements.begin(), placements.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second < b.second;
              return a.first->id < b.first->id;
            });
  for (auto& [src, t] : placements) {
    Sample s = *src;
    s.task = t;
    const std::vector<int> space = stream.label_space(t);
    if (spec.flip_mode == FlipMode::Uniform) {
      s.candidates = flip_uniform(s.true_label, space, spec.flip_q, flip_rng);
    } else {
      s.candidates = set_intersect(flip_nonuniform(s.true_label, flip_matrix, flip_rng),
                                   space);
    }
    stream.train[t].push_back(std::move(s));
  }

  stream.test = dataset.test;
  for (Sample& s : stream.test) {
    s.task = intro[s.true_label];
    s.candidates.clear();
  }
  std::sort(stream.test.begin(), stream.test.end(),
            [](const Sample& a, const Sample& b) {
              if (a.task != b.task) return a.task < b.task;
              return a.id < b.id;
            });
  return stream;
}

namespace {

void write_record(std::ostream& os, const Sample& s) {
  os << s.id << '\t' << s.task << '\t' << s.true_label << '\t';
  for (std::size_t i = 0; i < s.candidates.size(); ++i) {
    if (i) os << ';';
    os << s.candidates[i];
  }
  os << '\t';
  for (int i = 0; i < s.features.size(); ++i) {
    if (i) os << ',';
    os << format_g17(s.features[i]);
  }
  os << '\n';
}

Sample parse_record(const std::string& line, int feature_dim) {
  std::istringstream ls(line);
  std::string field;
  Sample s;
  if (!std::getline(ls, field, '\t')) throw std::runtime_error("stream record: missing id");
  s.id = std::stoi(field);
  if (!std::getline(ls, field, '\t')) throw std::runtime_error("stream record: missing task");
  s.task = std::stoi(field);
  if (!std::getline(ls, field, '\t')) throw std::runtime_error("stream record: missing label");
  s.true_label = std::stoi(field);
  if (!std::getline(ls, field, '\t')) throw std::runtime_error("stream record: missing candidates");
  if (!field.empty()) {
    std::istringstream cs(field);
    std::string tok;
    while (std::getline(cs, tok, ';')) s.candidates.push_back(std::stoi(tok));
  }
  if (!std::getline(ls, field)) throw std::runtime_error("stream record: missing features");
  s.features.resize(feature_dim);
  std::istringstream fs(field);
  std::string tok;
  int i = 0;
  while (std::getline(fs, tok, ',')) {
    if (i >= feature_dim) throw std::runtime_error("stream record: too many features");
    s.features[i++] = std::stod(tok);
  }
  if (i != feature_dim) throw std::runtime_error("stream record: feature count mismatch");
  return s;
}

}  // namespace

void write_stream(std::ostream& os, const TaskStream& stream) {
  os << "#ipll-stream\tC=" << stream.num_classes << "\td=" << stream.feature_dim
     << "\tT=" << stream.num_tasks << "\tq=" << format_g17(stream.flip_q)
     << "\tW=" << stream.blurry_w << "\tseed=" << stream.seed << '\n';
  for (const auto& task : stream.train)
    for (const Sample& s : task) write_record(os, s);
  for (const Sample& s : stream.test) write_record(os, s);
}

void write_stream_file(const std::string& path, const TaskStream& stream) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_stream(os, stream);
}

TaskStream read_stream(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("#ipll-stream", 0) != 0)
    throw std::runtime_error("stream file: bad header");
  TaskStream stream;
  {
    std::istringstream hs(header);
    std::string tok;
    std::getline(hs, tok, '\t');  // magic
    auto expect = [&](const char* key) {
      if (!std::getline(hs, tok, '\t') || tok.rfind(key, 0) != 0)
        throw std::runtime_error(std::string("stream header: missing ") + key);
      return tok.substr(std::string(key).size());
    };
    stream.num_classes = std::stoi(expect("C="));
    stream.feature_dim = std::stoi(expect("d="));
    stream.num_tasks = std::stoi(expect("T="));
    stream.flip_q = std::stod(expect("q="));
    stream.blurry_w = std::stoi(expect("W="));
    stream.seed = std::stoull(expect("seed="));
  }
  stream.train.resize(stream.num_tasks);
  stream.class_intro_task.assign(stream.num_classes, stream.num_tasks);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Sample s = parse_record(line, stream.feature_dim);
    if (s.true_label < 0 || s.true_label >= stream.num_classes ||
        s.task < 0 || s.task >= stream.num_tasks)
      throw std::runtime_error("stream record: label or task out of range");
    if (s.candidates.empty()) {
      // Test record; its task column pins the class introduction task.
      stream.class_intro_task[s.true_label] = s.task;
      stream.test.push_back(std::move(s));
    } else {
      stream.train[s.task].push_back(std::move(s));
    }
  }
  for (int c = 0; c < stream.num_classes; ++c)
    if (stream.class_intro_task[c] >= stream.num_tasks)
      throw std::runtime_error("stream file: class with no test records");
  return stream;
}

TaskStream read_stream_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_stream(is);
}

}  // namespace ipll
