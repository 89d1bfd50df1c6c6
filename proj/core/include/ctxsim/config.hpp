#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxsim/losses.hpp"
#include "ctxsim/model.hpp"

namespace ctxsim {

// One flat record drives a whole run. Loading is strict: every key must be
// present and unknown keys are rejected, so a config file is always complete.
struct ExperimentConfig {
  // loss
  double lambda = 0.4;
  double gamma = 0.1;
  double delta_plus = 0.75;
  double delta_minus = 0.6;
  double s_tilde = 0.25;
  double alpha = 10.0;
  double epsilon = 0.05;
  double tau = 0.01;
  int k = 4;
  std::string variant = "full";
  // data
  int num_circles = 5;
  int points_per_circle = 200;
  double noise_sigma = 0.05;
  // sampler
  int labels_per_batch = 5;
  // model
  std::vector<int> widths = {2, 64, 64, 2};
  // optimizer
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<int> lr_decay_epochs = {15, 30, 45};
  double lr_decay_factor = 0.3;
  int epochs = 50;
  int eval_every = 1;
  // run
  uint64_t seed = 42;
  std::string out_dir = "out";

  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// FNV-1a over the canonical serialization; 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

LossConfig to_loss_config(const ExperimentConfig& cfg);
TrainConfig to_train_config(const ExperimentConfig& cfg);

// Derived sub-seeds so the run seed fans out to independent streams.
uint64_t data_seed(const ExperimentConfig& cfg);
uint64_t eval_data_seed(const ExperimentConfig& cfg);

}  // namespace ctxsim
