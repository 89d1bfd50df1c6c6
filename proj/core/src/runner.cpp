#include "ctxsim/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "ctxsim/data.hpp"
#include "ctxsim/eval.hpp"
#include "ctxsim/model.hpp"
#include "ctxsim/svg.hpp"

namespace ctxsim {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

void write_metrics_csv(const TrainingReport& report, const std::string& path,
                       const std::string& hash, uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# config_hash=" << hash << " seed=" << seed << "\n";
  out << "step,epoch,lr,loss_total,loss_context,loss_contrast,loss_reg,"
         "recall_at_1,mean_distance\n";
  size_t e = 0;
  for (const StepRecord& sr : report.steps) {
    out << sr.step << "," << sr.epoch << "," << num(sr.lr) << "," << num(sr.total) << ","
        << num(sr.context) << "," << num(sr.contrast) << "," << num(sr.reg) << ",";
    while (e < report.evals.size() && report.evals[e].step < sr.step) ++e;
    if (e < report.evals.size() && report.evals[e].step == sr.step) {
      out << num(report.evals[e].recall1) << "," << num(report.evals[e].mean_distance);
    } else {
      out << ",";
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

// Retrieval metrics of a finished model on the clean evaluation set. Returns
// null when the embedding is degenerate (possible after an aborted run).
nlohmann::json eval_metrics_json(const MlpParams& params, const LabeledDataset& ds) {
  try {
    Matrix emb = embed_dataset(params, ds.points);
    RetrievalResult rr = rank_self_retrieval(emb, ds.labels);
    std::vector<double> recalls = recall_at_k(rr, {1, 2, 4, 8});
    ApSummary ap = mean_average_precision(rr);
    DistanceStats stats = pairwise_distance_stats(emb);
    nlohmann::json j;
    j["recall_at_1"] = recalls[0];
    j["recall_at_2"] = recalls[1];
    j["recall_at_4"] = recalls[2];
    j["recall_at_8"] = recalls[3];
    j["map"] = ap.map;
    j["map_at_r"] = ap.map_at_r;
    j["mean_pairwise_distance"] = stats.mean;
    j["num_points"] = ds.size();
    return j;
  } catch (const std::exception&) {
    return nullptr;
  }
}

void write_embedding_svg(const MlpParams& params, const LabeledDataset& ds,
                         const std::string& path, const std::string& title) {
  try {
    Matrix emb = embed_dataset(params, ds.points);
    if (emb.cols() == 2) write_scatter_svg(emb, ds.labels, path, title);
  } catch (const std::exception&) {
    // A degenerate embedding is already reported through the metrics files.
  }
}

}  // namespace

int run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  std::string hash = config_hash(cfg);

  LabeledDataset train_ds = gen_concentric_circles(cfg.num_circles, cfg.points_per_circle,
                                                   cfg.noise_sigma, data_seed(cfg));
  LabeledDataset eval_ds =
      gen_concentric_circles(cfg.num_circles, cfg.points_per_circle, 0.0, eval_data_seed(cfg));

  TrainingReport report = train_mlp(train_ds, eval_ds, to_loss_config(cfg), to_train_config(cfg));

  save_config(cfg, cfg.out_dir + "/config.json");
  write_metrics_csv(report, cfg.out_dir + "/metrics.csv", hash, cfg.seed);
  save_checkpoint(report.params, cfg.out_dir, hash, cfg.seed);

  nlohmann::json j;
  j["config_hash"] = hash;
  j["seed"] = cfg.seed;
  j["variant"] = cfg.variant;
  j["aborted"] = report.aborted;
  j["abort_step"] = report.abort_step;
  j["abort_reason"] = report.abort_reason;
  j["steps_run"] = report.steps.size();
  j["skipped_batches"] = report.skipped_batches;
  if (!report.steps.empty()) {
    const StepRecord& last = report.steps.back();
    j["final_loss"] = {{"total", last.total},
                       {"context", last.context},
                       {"contrast", last.contrast},
                       {"reg", last.reg}};
  } else {
    j["final_loss"] = nullptr;
  }
  j["eval"] = eval_metrics_json(report.params, eval_ds);
  std::ofstream out(cfg.out_dir + "/final_metrics.json");
  if (!out) throw std::runtime_error("cannot open " + cfg.out_dir + "/final_metrics.json");
  out << j.dump(2) << "\n";

  write_embedding_svg(report.params, eval_ds, cfg.out_dir + "/embeddings.svg",
                      "embeddings " + hash);
  return report.aborted ? kExitNumericAbort : kExitOk;
}

int run_eval(const std::string& checkpoint_dir, const std::string& data_csv,
             const std::string& out_dir) {
  MlpParams params = load_checkpoint(checkpoint_dir);
  std::ifstream mf(checkpoint_dir + "/checkpoint.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  std::string hash = manifest.value("config_hash", "unknown");

  LabeledDataset ds = read_dataset_csv(data_csv);
  ensure_dir(out_dir);

  nlohmann::json j;
  j["config_hash"] = hash;
  j["dataset"] = data_csv;
  j["metrics"] = eval_metrics_json(params, ds);
  std::ofstream out(out_dir + "/eval_metrics.json");
  if (!out) throw std::runtime_error("cannot open " + out_dir + "/eval_metrics.json");
  out << j.dump(2) << "\n";

  Matrix emb = embed_dataset(params, ds.points);
  DistanceStats stats = pairwise_distance_stats(emb);
  std::ofstream hist(out_dir + "/distance_histogram.csv");
  if (!hist) throw std::runtime_error("cannot open " + out_dir + "/distance_histogram.csv");
  hist << "# config_hash=" << hash << "\n";
  hist << "bin_lo,bin_hi,count\n";
  for (size_t b = 0; b < stats.histogram.size(); ++b) {
    hist << num(b * stats.bin_width) << "," << num((b + 1) * stats.bin_width) << ","
         << stats.histogram[b] << "\n";
  }

  write_embedding_svg(params, ds, out_dir + "/embeddings.svg", "embeddings " + hash);
  return kExitOk;
}

int run_oracle_check(const OracleCheckOptions& opt) {
  CheckReport report = run_oracle_equivalence(opt);
  print_report(report);
  return report.all_passed ? kExitOk : kExitVerificationFailure;
}

int run_gradcheck(unsigned long long seed) {
  CheckReport report = run_gradient_checks(seed);
  print_report(report);
  return report.all_passed ? kExitOk : kExitVerificationFailure;
}

int run_gen_data(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  std::string hash = config_hash(cfg);
  LabeledDataset ds = gen_concentric_circles(cfg.num_circles, cfg.points_per_circle,
                                             cfg.noise_sigma, data_seed(cfg));
  char comment[96];
  std::snprintf(comment, sizeof(comment), "config_hash=%s seed=%llu", hash.c_str(),
                static_cast<unsigned long long>(cfg.seed));
  write_dataset_csv(ds, cfg.out_dir + "/dataset.csv", comment);
  write_scatter_svg(ds.points, ds.labels, cfg.out_dir + "/dataset.svg", "dataset " + hash);
  return kExitOk;
}

void print_report(const CheckReport& report) {
  for (const CheckItem& item : report.items) {
    std::printf("[%s] %s: metric=%.6g (tol %.3g) %s\n", item.passed ? "PASS" : "FAIL",
                item.name.c_str(), item.metric, item.threshold, item.detail.c_str());
  }
  std::printf("%s\n", report.all_passed ? "all checks passed" : "CHECKS FAILED");
}

}  // namespace ctxsim
