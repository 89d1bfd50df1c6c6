#include "ctxsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ctxsim {

using nlohmann::json;

void ExperimentConfig::validate() const {
  to_loss_config(*this).validate();
  if (num_circles < 1 || points_per_circle < 1) {
    throw std::invalid_argument("config: need at least one circle and point");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("config: noise_sigma must be >= 0");
  if (labels_per_batch < 1) throw std::invalid_argument("config: labels_per_batch must be >= 1");
  if (widths.size() < 2) throw std::invalid_argument("config: widths needs input and output");
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("config: widths must be positive");
  }
  if (widths.front() != 2) throw std::invalid_argument("config: input width must be 2");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("config: betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be positive");
  if (!(lr_decay_factor > 0.0)) throw std::invalid_argument("config: lr_decay_factor must be positive");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
  if (out_dir.empty()) throw std::invalid_argument("config: out_dir must not be empty");
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "lambda",        "gamma",          "delta_plus", "delta_minus",     "s_tilde",
      "alpha",         "epsilon",        "tau",        "k",               "variant",
      "num_circles",   "points_per_circle", "noise_sigma", "labels_per_batch",
      "widths",        "lr",             "beta1",      "beta2",           "adam_eps",
      "lr_decay_epochs", "lr_decay_factor", "epochs",  "eval_every",      "seed",
      "out_dir"};
  return keys;
}

json config_json(const ExperimentConfig& c) {
  // json objects keep keys sorted, which makes the dump canonical.
  json j;
  j["lambda"] = c.lambda;
  j["gamma"] = c.gamma;
  j["delta_plus"] = c.delta_plus;
  j["delta_minus"] = c.delta_minus;
  j["s_tilde"] = c.s_tilde;
  j["alpha"] = c.alpha;
  j["epsilon"] = c.epsilon;
  j["tau"] = c.tau;
  j["k"] = c.k;
  j["variant"] = c.variant;
  j["num_circles"] = c.num_circles;
  j["points_per_circle"] = c.points_per_circle;
  j["noise_sigma"] = c.noise_sigma;
  j["labels_per_batch"] = c.labels_per_batch;
  j["widths"] = c.widths;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["lr_decay_epochs"] = c.lr_decay_epochs;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["epochs"] = c.epochs;
  j["eval_every"] = c.eval_every;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

  for (const auto& [key, _] : j.items()) {
    if (!known_keys().count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  for (const auto& key : known_keys()) {
    if (!j.contains(key)) {
      throw std::invalid_argument("config: missing key '" + key + "'");
    }
  }

  ExperimentConfig c;
  try {
    c.lambda = j.at("lambda").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.delta_plus = j.at("delta_plus").get<double>();
    c.delta_minus = j.at("delta_minus").get<double>();
    c.s_tilde = j.at("s_tilde").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.tau = j.at("tau").get<double>();
    c.k = j.at("k").get<int>();
    c.variant = j.at("variant").get<std::string>();
    c.num_circles = j.at("num_circles").get<int>();
    c.points_per_circle = j.at("points_per_circle").get<int>();
    c.noise_sigma = j.at("noise_sigma").get<double>();
    c.labels_per_batch = j.at("labels_per_batch").get<int>();
    c.widths = j.at("widths").get<std::vector<int>>();
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.lr_decay_epochs = j.at("lr_decay_epochs").get<std::vector<int>>();
    c.lr_decay_factor = j.at("lr_decay_factor").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.eval_every = j.at("eval_every").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value type: ") + e.what());
  }
  parse_loss_variant(c.variant);  // reject unknown names early
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2); }

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << config_to_json(cfg) << "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::string canonical = config_json(cfg).dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

LossConfig to_loss_config(const ExperimentConfig& cfg) {
  LossConfig lc;
  lc.lambda = cfg.lambda;
  lc.gamma = cfg.gamma;
  lc.delta_plus = cfg.delta_plus;
  lc.delta_minus = cfg.delta_minus;
  lc.s_tilde = cfg.s_tilde;
  lc.alpha = cfg.alpha;
  lc.epsilon = cfg.epsilon;
  lc.tau = cfg.tau;
  lc.k = cfg.k;
  lc.variant = parse_loss_variant(cfg.variant);
  return lc;
}

TrainConfig to_train_config(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.model.widths = cfg.widths;
  tc.opt.lr = cfg.lr;
  tc.opt.beta1 = cfg.beta1;
  tc.opt.beta2 = cfg.beta2;
  tc.opt.eps = cfg.adam_eps;
  tc.opt.decay_epochs = cfg.lr_decay_epochs;
  tc.opt.decay_factor = cfg.lr_decay_factor;
  tc.epochs = cfg.epochs;
  tc.labels_per_batch = cfg.labels_per_batch;
  tc.eval_every = cfg.eval_every;
  tc.seed = cfg.seed;
  return tc;
}

uint64_t data_seed(const ExperimentConfig& cfg) { return cfg.seed; }
uint64_t eval_data_seed(const ExperimentConfig& cfg) { return cfg.seed + 1000003ULL; }

}  // namespace ctxsim
