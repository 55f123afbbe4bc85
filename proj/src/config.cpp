#include "ipll/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace ipll {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::map<std::string, std::string> parse_kv(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": empty key or value");
    if (!kv.emplace(key, value).second)
      throw std::runtime_error("config: duplicate key '" + key + "'");
  }
  return kv;
}

class KvReader {
 public:
  explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool take(const std::string& key, std::string& out) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return false;
    out = it->second;
    kv_.erase(it);
    return true;
  }
  void get(const std::string& key, int& v) {
    std::string s;
    if (take(key, s)) v = std::stoi(s);
  }
  void get(const std::string& key, double& v) {
    std::string s;
    if (take(key, s)) v = std::stod(s);
  }
  void get(const std::string& key, std::uint64_t& v) {
    std::string s;
    if (take(key, s)) v = std::stoull(s);
  }
  void get(const std::string& key, bool& v) {
    std::string s;
    if (!take(key, s)) return;
    if (s == "true" || s == "1") v = true;
    else if (s == "false" || s == "0") v = false;
    else throw std::runtime_error("config: boolean expected for '" + key + "'");
  }
  void get(const std::string& key, std::string& v) { take(key, v); }

  void finish() const {
    if (kv_.empty()) return;
    std::string keys;
    for (const auto& [k, v] : kv_) keys += (keys.empty() ? "" : ", ") + k;
    throw std::runtime_error("config: unknown key(s): " + keys);
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace

GenSpec parse_gen_spec(std::istream& is) {
  KvReader r(parse_kv(is));
  GenSpec g;
  r.get("num_classes", g.dataset.num_classes);
  r.get("feature_dim", g.dataset.feature_dim);
  r.get("samples_per_class", g.dataset.samples_per_class);
  r.get("cluster_separation", g.dataset.cluster_separation);
  r.get("cluster_stddev", g.dataset.cluster_stddev);
  r.get("seed", g.dataset.seed);
  g.stream.seed = g.dataset.seed;
  r.get("tasks", g.stream.num_tasks);
  r.get("blurry_w", g.stream.blurry_w);
  r.get("flip_q", g.stream.flip_q);
  std::string mode;
  if (r.take("flip_mode", mode)) {
    if (mode == "uniform") g.stream.flip_mode = FlipMode::Uniform;
    else if (mode == "nonuniform") g.stream.flip_mode = FlipMode::NonUniform;
    else throw std::runtime_error("config: flip_mode must be uniform|nonuniform");
  }
  r.finish();
  return g;
}

GenSpec load_gen_spec_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return parse_gen_spec(is);
}

PGDRConfig parse_run_config(std::istream& is) {
  KvReader r(parse_kv(is));
  PGDRConfig c;
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("sgd_momentum", c.sgd_momentum);
  r.get("w_ce", c.weights.ce);
  r.get("w_kd", c.weights.kd);
  r.get("w_cr", c.weights.cr);
  r.get("alpha", c.sep.alpha);
  r.get("beta_start", c.sep.beta_start);
  r.get("beta_end", c.sep.beta_end);
  r.get("em_tol", c.sep.em_tol);
  r.get("em_max_iters", c.sep.em_max_iters);
  r.get("memory_budget", c.mem.budget);
  r.get("knn_k", c.mem.k_neighbors);
  r.get("diverse_fraction", c.mem.diverse_fraction);
  r.get("gamma", c.gamma);
  r.get("seed", c.seed);
  r.get("hidden_dim", c.hidden_dim);
  r.get("aug_sigma_weak", c.aug_sigma_weak);
  r.get("aug_sigma_strong", c.aug_sigma_strong);
  r.get("kd_temperature", c.kd_temperature);
  r.get("freeze_memory_labels", c.freeze_memory_labels);
  std::string s;
  if (r.take("variant", s)) c.variant = variant_from_string(s);
  if (r.take("eval_classifier", s)) {
    if (s == "prototype") c.eval_classifier = EvalMode::Prototype;
    else if (s == "linear") c.eval_classifier = EvalMode::Linear;
    else throw std::runtime_error("config: eval_classifier must be prototype|linear");
  }
  if (r.take("activation", s)) c.activation = activation_from_string(s);
  if (r.take("argmax_space", s)) {
    if (s == "original") c.argmax_space = ArgmaxSpace::Original;
    else if (s == "reallocated") c.argmax_space = ArgmaxSpace::Reallocated;
    else throw std::runtime_error("config: argmax_space must be original|reallocated");
  }
  r.finish();
  if (const char* env = std::getenv("IPLL_SEED")) c.seed = std::stoull(env);
  c.validate();
  return c;
}

PGDRConfig load_run_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return parse_run_config(is);
}

}  // namespace ipll
