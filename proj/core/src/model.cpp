#include "ctxsim/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "ctxsim/eval.hpp"

namespace ctxsim {

MlpParams MlpParams::init(const MlpConfig& cfg, uint64_t seed) {
  if (cfg.widths.size() < 2) {
    throw std::invalid_argument("MlpParams::init: need at least input and output widths");
  }
  for (int w : cfg.widths) {
    if (w < 1) throw std::invalid_argument("MlpParams::init: widths must be positive");
  }
  MlpParams p;
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < cfg.widths.size(); ++l) {
    int fan_in = cfg.widths[l], fan_out = cfg.widths[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = uniform(rng);
    Matrix b(1, fan_out);
    for (int j = 0; j < fan_out; ++j) b(0, j) = uniform(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

MlpVars load_mlp(Tape& tape, const MlpParams& params, bool requires_grad) {
  MlpVars vars;
  for (const Matrix& w : params.weights) vars.weights.push_back(tape.leaf(w, requires_grad));
  for (const Matrix& b : params.biases) vars.biases.push_back(tape.leaf(b, requires_grad));
  return vars;
}

Tensor mlp_embed(Tape& tape, const MlpVars& vars, const Matrix& x) {
  if (vars.weights.empty()) throw std::invalid_argument("mlp_embed: no layers");
  Tensor h = tape.constant(x);
  int layers = static_cast<int>(vars.weights.size());
  for (int l = 0; l < layers; ++l) {
    h = add_bias(matmul(h, vars.weights[l]), vars.biases[l]);
    if (l + 1 < layers) h = relu(h);
  }
  return row_l2_normalize(h);
}

Matrix embed_dataset(const MlpParams& params, const Matrix& points) {
  Tape tape;
  MlpVars vars = load_mlp(tape, params, false);
  return mlp_embed(tape, vars, points).value();
}

std::vector<Matrix> collect_grads(const MlpVars& vars) {
  std::vector<Matrix> grads;
  auto take = [&grads](const Tensor& t) {
    if (t.has_grad()) {
      grads.push_back(t.grad());
    } else {
      grads.push_back(Matrix(t.rows(), t.cols(), 0.0));
    }
  };
  for (const Tensor& w : vars.weights) take(w);
  for (const Tensor& b : vars.biases) take(b);
  return grads;
}

AdamState AdamState::init(const MlpParams& params) {
  AdamState st;
  for (const Matrix& w : params.weights) {
    st.m.push_back(Matrix(w.rows(), w.cols(), 0.0));
    st.v.push_back(Matrix(w.rows(), w.cols(), 0.0));
  }
  for (const Matrix& b : params.biases) {
    st.m.push_back(Matrix(b.rows(), b.cols(), 0.0));
    st.v.push_back(Matrix(b.rows(), b.cols(), 0.0));
  }
  return st;
}

double scheduled_lr(const AdamConfig& cfg, int epoch) {
  double lr = cfg.lr;
  for (int boundary : cfg.decay_epochs) {
    if (epoch >= boundary) lr *= cfg.decay_factor;
  }
  return lr;
}

void adam_step(MlpParams& params, const std::vector<Matrix>& grads, AdamState& state,
               const AdamConfig& cfg, double lr) {
  size_t num_params = params.weights.size() + params.biases.size();
  if (grads.size() != num_params || state.m.size() != num_params) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  for (const Matrix& g : grads) {
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g.data()[i])) {
        throw std::runtime_error("adam_step: non-finite gradient");
      }
    }
  }
  state.t += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  auto update = [&](Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = g.data()[i];
      m.data()[i] = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
      v.data()[i] = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
      double m_hat = m.data()[i] / bc1;
      double v_hat = v.data()[i] / bc2;
      p.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  };

  size_t idx = 0;
  for (Matrix& w : params.weights) update(w, grads[idx], state.m[idx], state.v[idx]), ++idx;
  for (Matrix& b : params.biases) update(b, grads[idx], state.m[idx], state.v[idx]), ++idx;
}

TrainingReport train_mlp(const LabeledDataset& train_ds, const LabeledDataset& eval_ds,
                         const LossConfig& loss_cfg, const TrainConfig& tc) {
  loss_cfg.validate();
  if (tc.epochs < 1) throw std::invalid_argument("train_mlp: epochs must be >= 1");
  if (tc.eval_every < 1) throw std::invalid_argument("train_mlp: eval_every must be >= 1");

  SamplerPlan plan =
      m_per_class_sampler(train_ds, tc.labels_per_batch, loss_cfg.k, tc.epochs, tc.seed + 1);

  TrainingReport report;
  report.params = MlpParams::init(tc.model, tc.seed);
  AdamState adam = AdamState::init(report.params);

  auto evaluate = [&](int epoch, int step) {
    Matrix emb = embed_dataset(report.params, eval_ds.points);
    EvalRecord ev;
    ev.epoch = epoch;
    ev.step = step;
    ev.recall1 = recall_at_1(emb, eval_ds.labels);
    ev.mean_distance = pairwise_distance_stats(emb).mean;
    report.evals.push_back(ev);
  };

  int step = 0;
  for (int epoch = 0; epoch < tc.epochs && !report.aborted; ++epoch) {
    double lr = scheduled_lr(tc.opt, epoch);
    int updates_this_epoch = 0;
    for (int b = 0; b < plan.batches_per_epoch; ++b) {
      const std::vector<int>& idx = plan.batches[epoch * plan.batches_per_epoch + b];
      Matrix x(static_cast<int>(idx.size()), train_ds.points.cols());
      std::vector<int> labels(idx.size());
      for (size_t r = 0; r < idx.size(); ++r) {
        for (int c = 0; c < x.cols(); ++c) x(static_cast<int>(r), c) = train_ds.points(idx[r], c);
        labels[r] = train_ds.labels[idx[r]];
      }

      try {
        Tape tape;
        MlpVars vars = load_mlp(tape, report.params);
        Tensor f = mlp_embed(tape, vars, x);
        Batch batch = make_batch(f, labels);
        LossBreakdown loss = combined_loss(batch, loss_cfg);

        double total = loss.total.value()(0, 0);
        if (!std::isfinite(total)) {
          throw std::runtime_error("non-finite loss at step " + std::to_string(step));
        }

        tape.backward(loss.total);
        std::vector<Matrix> grads = collect_grads(vars);
        adam_step(report.params, grads, adam, tc.opt, lr);

        StepRecord rec;
        rec.step = step;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.total = total;
        rec.context = loss.context.value()(0, 0);
        rec.contrast = loss.contrast.value()(0, 0);
        rec.reg = loss.reg.value()(0, 0);
        report.steps.push_back(rec);
        ++updates_this_epoch;
        ++step;
      } catch (const std::invalid_argument&) {
        // The loss rejected this batch's geometry. No update happened; move
        // on to the next batch.
        ++report.skipped_batches;
      } catch (const std::exception& e) {
        // Parameters were not updated by the failing step; keep them.
        report.aborted = true;
        report.abort_step = step;
        report.abort_reason = e.what();
        break;
      }
    }
    if (!report.aborted && updates_this_epoch == 0) {
      report.aborted = true;
      report.abort_step = step;
      report.abort_reason = "epoch " + std::to_string(epoch) + " produced no usable batch";
    }
    if (!report.aborted && ((epoch + 1) % tc.eval_every == 0 || epoch + 1 == tc.epochs)) {
      evaluate(epoch, step - 1);
    }
  }
  if (report.aborted) {
    try {
      evaluate(report.steps.empty() ? 0 : report.steps.back().epoch, step - 1);
    } catch (const std::exception&) {
      // Last-good parameters may still embed degenerately; the report already
      // carries the abort reason.
    }
  }
  return report;
}

void save_checkpoint(const MlpParams& params, const std::string& dir,
                     const std::string& config_hash, uint64_t seed) {
  nlohmann::json manifest;
  manifest["config_hash"] = config_hash;
  manifest["seed"] = seed;
  manifest["params_file"] = "params.csv";
  nlohmann::json shapes = nlohmann::json::array();
  for (size_t l = 0; l < params.weights.size(); ++l) {
    shapes.push_back({{"name", "w" + std::to_string(l)},
                      {"rows", params.weights[l].rows()},
                      {"cols", params.weights[l].cols()}});
  }
  for (size_t l = 0; l < params.biases.size(); ++l) {
    shapes.push_back({{"name", "b" + std::to_string(l)},
                      {"rows", params.biases[l].rows()},
                      {"cols", params.biases[l].cols()}});
  }
  manifest["tensors"] = shapes;

  std::ofstream mf(dir + "/checkpoint.json");
  if (!mf) throw std::runtime_error("save_checkpoint: cannot open " + dir + "/checkpoint.json");
  mf << manifest.dump(2) << "\n";

  std::ofstream pf(dir + "/params.csv");
  if (!pf) throw std::runtime_error("save_checkpoint: cannot open " + dir + "/params.csv");
  pf << "# config_hash=" << config_hash << " seed=" << seed << "\n";
  pf << "name,row,col,value\n";
  char buf[64];
  auto dump = [&](const std::string& name, const Matrix& m) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
        pf << name << "," << i << "," << j << "," << buf << "\n";
      }
  };
  for (size_t l = 0; l < params.weights.size(); ++l) dump("w" + std::to_string(l), params.weights[l]);
  for (size_t l = 0; l < params.biases.size(); ++l) dump("b" + std::to_string(l), params.biases[l]);
  if (!pf) throw std::runtime_error("save_checkpoint: write failed");
}

MlpParams load_checkpoint(const std::string& dir) {
  std::ifstream mf(dir + "/checkpoint.json");
  if (!mf) throw std::runtime_error("load_checkpoint: cannot open " + dir + "/checkpoint.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);

  std::vector<std::pair<std::string, Matrix>> tensors;
  for (const auto& t : manifest.at("tensors")) {
    tensors.emplace_back(t.at("name").get<std::string>(),
                         Matrix(t.at("rows").get<int>(), t.at("cols").get<int>()));
  }
  auto find = [&tensors](const std::string& name) -> Matrix* {
    for (auto& [n, m] : tensors)
      if (n == name) return &m;
    return nullptr;
  };

  std::ifstream pf(dir + "/" + manifest.at("params_file").get<std::string>());
  if (!pf) throw std::runtime_error("load_checkpoint: cannot open params file");
  std::string line;
  bool header_seen = false;
  while (std::getline(pf, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // name,row,col,value
      continue;
    }
    std::istringstream ss(line);
    std::string name, row, col, value;
    if (!std::getline(ss, name, ',') || !std::getline(ss, row, ',') ||
        !std::getline(ss, col, ',') || !std::getline(ss, value)) {
      throw std::runtime_error("load_checkpoint: malformed row '" + line + "'");
    }
    Matrix* m = find(name);
    if (!m) throw std::runtime_error("load_checkpoint: unknown tensor " + name);
    (*m)(std::stoi(row), std::stoi(col)) = std::stod(value);
  }

  MlpParams params;
  for (auto& [name, m] : tensors) {
    if (name[0] == 'w') params.weights.push_back(std::move(m));
  }
  for (auto& [name, m] : tensors) {
    if (name[0] == 'b') params.biases.push_back(std::move(m));
  }
  if (params.weights.size() != params.biases.size() || params.weights.empty()) {
    throw std::runtime_error("load_checkpoint: inconsistent tensor set");
  }
  return params;
}

}  // namespace ctxsim
