#include "openhybrid/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace openhybrid {

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class KeyReader {
 public:
  explicit KeyReader(const std::map<std::string, std::string>& kv) : kv_(kv) {}

  bool has(const std::string& key) {
    used_.insert(key);
    return kv_.count(key) > 0;
  }
  std::string str(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::size_t pos = 0;
    double v;
    try {
      v = std::stod(it->second, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "': not a number: " + it->second);
    }
    if (pos != it->second.size()) {
      throw std::invalid_argument("config key '" + key + "': not a number: " + it->second);
    }
    return v;
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    const double v = num(key, static_cast<double>(fallback));
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw std::invalid_argument("config key '" + key + "': expected a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  }
  std::vector<std::size_t> count_list(const std::string& key,
                                      const std::vector<std::size_t>& fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<std::size_t> out;
    for (const std::string& tok : split_commas(it->second)) {
      out.push_back(static_cast<std::size_t>(std::stoul(tok)));
    }
    return out;
  }
  std::vector<std::uint64_t> seed_list(const std::string& key,
                                       const std::vector<std::uint64_t>& fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<std::uint64_t> out;
    for (const std::string& tok : split_commas(it->second)) {
      out.push_back(std::stoull(tok));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : kv_) {
      (void)value;
      if (!used_.count(key)) throw std::invalid_argument("unknown config key: " + key);
    }
  }

 private:
  const std::map<std::string, std::string>& kv_;
  std::set<std::string> used_;
};

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value, got: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

std::string ExperimentConfig::checkpoint_path() const {
  return checkpoint.empty() ? out_dir + "/model.ohyb" : checkpoint;
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
  KeyReader r(kv);
  ExperimentConfig cfg;

  cfg.dataset = r.str("dataset", cfg.dataset);
  if (cfg.dataset != "synthetic" && cfg.dataset != "idx") {
    throw std::invalid_argument("dataset must be 'synthetic' or 'idx'");
  }
  cfg.classes = r.count("classes", cfg.classes);
  cfg.per_class = r.count("per_class", cfg.per_class);
  cfg.dim = r.count("dim", cfg.dim);
  cfg.spread = r.num("spread", cfg.spread);
  cfg.data_seed = static_cast<std::uint64_t>(r.count("data_seed", 7));
  cfg.idx_images = r.str("idx_images", "");
  cfg.idx_labels = r.str("idx_labels", "");
  cfg.subsample_per_class = r.count("subsample_per_class", 0);
  cfg.subsample_seed = static_cast<std::uint64_t>(r.count("subsample_seed", 11));

  cfg.model.d_latent = r.count("d_latent", cfg.model.d_latent);
  cfg.model.encoder_hidden = r.count_list("encoder_hidden", cfg.model.encoder_hidden);
  cfg.model.encoder_act = activation_from_string(r.str("encoder_act", "tanh"));
  cfg.model.classifier_hidden = r.count_list("classifier_hidden", cfg.model.classifier_hidden);
  cfg.model.flow_pairs = r.count("flow_pairs", cfg.model.flow_pairs);
  cfg.model.flow_hidden = r.count_list("flow_hidden", cfg.model.flow_hidden);
  cfg.model.scale_cap_init = r.num("scale_cap", cfg.model.scale_cap_init);

  cfg.train.regime = regime_from_string(r.str("regime", "joint"));
  cfg.train.lambda = r.num("lambda", cfg.train.lambda);
  cfg.train.epochs = r.count("epochs", cfg.train.epochs);
  cfg.train.batch_size = r.count("batch_size", cfg.train.batch_size);
  cfg.train.lr_classifier = r.num("lr_classifier", cfg.train.lr_classifier);
  cfg.train.momentum = r.num("momentum", cfg.train.momentum);
  cfg.train.lr_flow = r.num("lr_flow", cfg.train.lr_flow);
  cfg.train.grad_clip = r.num("grad_clip", cfg.train.grad_clip);
  cfg.train.seed = static_cast<std::uint64_t>(r.count("seed", 1));
  cfg.train.validate();

  cfg.k_known = r.count("k_known", cfg.k_known);
  cfg.partition_seeds = r.seed_list("partition_seeds", cfg.partition_seeds);
  if (r.has("n_partitions")) {
    const std::size_t n = r.count("n_partitions", cfg.partition_seeds.size());
    if (n == 0) throw std::invalid_argument("n_partitions must be >= 1");
    if (n <= cfg.partition_seeds.size()) {
      cfg.partition_seeds.resize(n);
    } else {
      while (cfg.partition_seeds.size() < n) {
        cfg.partition_seeds.push_back(cfg.partition_seeds.size() + 1);
      }
    }
  }
  if (cfg.partition_seeds.empty()) {
    throw std::invalid_argument("partition_seeds must not be empty");
  }
  cfg.s = r.num("s", cfg.s);

  cfg.out_dir = r.str("out_dir", cfg.out_dir);
  cfg.checkpoint = r.str("checkpoint", "");
  cfg.export_dataset_csv = r.str("export_dataset_csv", "");

  if (cfg.dataset == "idx" && (cfg.idx_images.empty() || cfg.idx_labels.empty())) {
    throw std::invalid_argument("dataset=idx requires idx_images and idx_labels");
  }
  r.reject_unknown();
  return cfg;
}

LabeledDataset make_dataset(const ExperimentConfig& cfg) {
  LabeledDataset ds;
  if (cfg.dataset == "synthetic") {
    ds = gen_gaussian_mixture(cfg.per_class, cfg.classes, cfg.dim, cfg.spread, cfg.data_seed);
  } else {
    ds = load_idx(cfg.idx_images, cfg.idx_labels);
  }
  if (cfg.subsample_per_class > 0) {
    ds = subsample_per_class(ds, cfg.subsample_per_class, cfg.subsample_seed);
  }
  return ds;
}

}  // namespace openhybrid
