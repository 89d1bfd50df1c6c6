#pragma once

#include <string>

#include "ctxsim/config.hpp"
#include "ctxsim/verify.hpp"

namespace ctxsim {

// Process exit codes shared with the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitVerificationFailure = 2;
inline constexpr int kExitNumericAbort = 3;

// Generates train and eval datasets, trains, and writes config.json,
// metrics.csv, final_metrics.json, a checkpoint and an embedding plot into
// cfg.out_dir. Returns kExitNumericAbort when training aborted.
int run_train(const ExperimentConfig& cfg);

// Embeds a CSV dataset with a saved checkpoint and writes retrieval metrics
// and a distance histogram into out_dir.
int run_eval(const std::string& checkpoint_dir, const std::string& data_csv,
             const std::string& out_dir);

int run_oracle_check(const OracleCheckOptions& opt);
int run_gradcheck(unsigned long long seed);

// Writes dataset.csv and dataset.svg for the config's training data.
int run_gen_data(const ExperimentConfig& cfg);

void print_report(const CheckReport& report);

}  // namespace ctxsim
