#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "ctxsim/runner.hpp"

namespace {

struct CommonOverrides {
  std::string config_path;
  long long seed = -1;
  std::string out_dir;
  std::string variant;
};

void add_common(CLI::App* cmd, CommonOverrides& ov, bool with_variant) {
  cmd->add_option("-c,--config", ov.config_path, "experiment config (json)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", ov.seed, "override the run seed");
  cmd->add_option("--out-dir", ov.out_dir, "override the output directory");
  if (with_variant) {
    cmd->add_option("--variant", ov.variant, "override the loss variant");
  }
}

ctxsim::ExperimentConfig resolve(const CommonOverrides& ov) {
  ctxsim::ExperimentConfig cfg = ctxsim::load_config(ov.config_path);
  if (ov.seed >= 0) cfg.seed = static_cast<uint64_t>(ov.seed);
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  if (!ov.variant.empty()) cfg.variant = ov.variant;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextual-similarity metric learning on toy data"};
  app.require_subcommand(1);

  CommonOverrides train_ov, gen_ov;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write metrics");
  add_common(train_cmd, train_ov, true);

  CLI::App* gen_cmd = app.add_subcommand("gen-data", "write the config's dataset as csv and svg");
  add_common(gen_cmd, gen_ov, false);

  std::string eval_ckpt, eval_data, eval_out = "out";
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a csv dataset");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--data", eval_data, "dataset csv")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out-dir", eval_out, "output directory");

  ctxsim::OracleCheckOptions oc;
  CLI::App* oracle_cmd =
      app.add_subcommand("oracle-check", "compare the tensor pipeline against set enumeration");
  oracle_cmd->add_option("--batches", oc.batches, "number of random batches")
      ->check(CLI::PositiveNumber);
  long long oracle_seed = -1;
  oracle_cmd->add_option("--seed", oracle_seed, "random batch seed");
  oracle_cmd
      ->add_flag("--corrupt-denominator", oc.corrupt_denominator,
                 "plant an off-by-one denominator; the check must then report a mismatch")
      ->group("");  // hidden: a self-test of the harness

  long long grad_seed = 7;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "gradient checks against closed forms "
                                                       "and finite differences");
  grad_cmd->add_option("--seed", grad_seed, "random draw seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? ctxsim::kExitOk : ctxsim::kExitConfigError;
  }

  try {
    if (*train_cmd) return ctxsim::run_train(resolve(train_ov));
    if (*gen_cmd) return ctxsim::run_gen_data(resolve(gen_ov));
    if (*eval_cmd) return ctxsim::run_eval(eval_ckpt, eval_data, eval_out);
    if (*oracle_cmd) {
      if (oracle_seed >= 0) oc.seed = static_cast<unsigned long long>(oracle_seed);
      return ctxsim::run_oracle_check(oc);
    }
    if (*grad_cmd) {
      return ctxsim::run_gradcheck(static_cast<unsigned long long>(grad_seed));
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return ctxsim::kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return ctxsim::kExitNumericAbort;
  }
  return ctxsim::kExitConfigError;
}
