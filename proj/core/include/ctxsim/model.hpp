#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxsim/data.hpp"
#include "ctxsim/losses.hpp"

namespace ctxsim {

struct MlpConfig {
  std::vector<int> widths = {2, 64, 64, 2};  // input, hidden..., output
};

// Hidden layers use relu; the output is row-normalized onto the unit sphere.
struct MlpParams {
  std::vector<Matrix> weights;  // weights[l] is widths[l] x widths[l+1]
  std::vector<Matrix> biases;   // biases[l] is 1 x widths[l+1]

  // Uniform init in +-1/sqrt(fan_in) for weights and biases alike.
  static MlpParams init(const MlpConfig& cfg, uint64_t seed);

  int num_layers() const { return static_cast<int>(weights.size()); }
};

struct MlpVars {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

MlpVars load_mlp(Tape& tape, const MlpParams& params, bool requires_grad = true);

Tensor mlp_embed(Tape& tape, const MlpVars& vars, const Matrix& x);

// Convenience forward pass on a throwaway tape.
Matrix embed_dataset(const MlpParams& params, const Matrix& points);

// Gradients in weights-then-biases order; zero matrices where no gradient
// reached a parameter. Call after Tape::backward.
std::vector<Matrix> collect_grads(const MlpVars& vars);

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<int> decay_epochs = {15, 30, 45};  // lr multiplies by decay_factor at each
  double decay_factor = 0.3;
};

struct AdamState {
  std::vector<Matrix> m, v;  // first and second moments, weights then biases
  long t = 0;

  static AdamState init(const MlpParams& params);
};

double scheduled_lr(const AdamConfig& cfg, int epoch);

// One bias-corrected update at the given rate. Throws std::runtime_error on a
// non-finite gradient.
void adam_step(MlpParams& params, const std::vector<Matrix>& grads, AdamState& state,
               const AdamConfig& cfg, double lr);

struct TrainConfig {
  MlpConfig model;
  AdamConfig opt;
  int epochs = 50;
  int labels_per_batch = 5;
  int eval_every = 1;  // epochs between held-out evaluations
  uint64_t seed = 0;
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0, context = 0.0, contrast = 0.0, reg = 0.0;
};

struct EvalRecord {
  int epoch = 0;
  int step = 0;  // last completed step
  double recall1 = 0.0;
  double mean_distance = 0.0;
};

struct TrainingReport {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  MlpParams params;  // final parameters; last good ones when aborted
  int skipped_batches = 0;
  bool aborted = false;
  int abort_step = -1;
  std::string abort_reason;
};

// Trains on train_ds batches and evaluates on eval_ds. A batch whose geometry
// the loss rejects (for instance a neighborhood covering the whole batch, which
// happens while the freshly initialized network still maps everything onto a
// small arc) is skipped without an update; an epoch in which every batch is
// skipped aborts. A non-finite loss or gradient aborts immediately, keeping
// the parameters from before the bad step.
TrainingReport train_mlp(const LabeledDataset& train_ds, const LabeledDataset& eval_ds,
                         const LossConfig& loss_cfg, const TrainConfig& tc);

// Array payload plus manifest. The manifest records shapes, seed and hash.
void save_checkpoint(const MlpParams& params, const std::string& dir,
                     const std::string& config_hash, uint64_t seed);
MlpParams load_checkpoint(const std::string& dir);

}  // namespace ctxsim
