// Acceptance harness. Each numbered check prints exactly one [PASS]/[FAIL]
// line; the process exits nonzero if any check fails. Thresholds that gate
// training quality are frozen from the baseline runs recorded in
// docs/baselines.md; the remaining tolerances are exactness bounds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ctxsim/config.hpp"
#include "ctxsim/eval.hpp"
#include "ctxsim/losses.hpp"
#include "ctxsim/model.hpp"
#include "ctxsim/oracle.hpp"
#include "ctxsim/runner.hpp"
#include "ctxsim/similarity.hpp"
#include "ctxsim/verify.hpp"

using namespace ctxsim;

namespace {

// Frozen from docs/baselines.md. The contextual-term-only run trains far
// below the other two arms; see the baseline notes for the analysis.
constexpr double kRecallThresholdL1 = 0.9;
constexpr double kRecallThresholdContextOnly = 0.55;
constexpr double kRecallThresholdFull = 0.9;

constexpr double kOracleTolerance = 1e-9;
constexpr double kAffineTolerance = 1e-9;
constexpr double kMeanSimilarityWindow = 0.05;
constexpr double kPerRunSecondsLimit = 300.0;
constexpr double kOracleSecondsLimit = 30.0;

int failures = 0;

void report(int id, bool pass, const std::string& text) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, text.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// The toy configuration every training check starts from: the shipped
// default, restated here so the harness cannot drift from it.
ExperimentConfig toy_base() {
  ExperimentConfig cfg;
  cfg.lambda = 0.4;
  cfg.gamma = 0.1;
  cfg.delta_plus = 0.75;
  cfg.delta_minus = 0.6;
  cfg.s_tilde = 0.25;
  cfg.alpha = 10.0;
  cfg.epsilon = 0.0;
  cfg.tau = 0.01;
  cfg.k = 4;
  cfg.variant = "full";
  cfg.num_circles = 5;
  cfg.points_per_circle = 200;
  cfg.noise_sigma = 0.05;
  cfg.labels_per_batch = 5;
  cfg.widths = {2, 64, 64, 2};
  cfg.lr = 0.01;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.adam_eps = 1e-8;
  cfg.lr_decay_epochs = {15, 30, 45};
  cfg.lr_decay_factor = 0.3;
  cfg.epochs = 50;
  cfg.eval_every = 1;
  cfg.seed = 5;
  cfg.out_dir = "out";
  return cfg;
}

struct ToyRun {
  TrainingReport report;
  LabeledDataset eval_ds;
  double recall1 = 0.0;
  double mean_distance = 0.0;
  double seconds = 0.0;
};

// Mirrors the train subcommand's data wiring so results match CLI runs.
ToyRun run_toy(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  ToyRun out;
  LabeledDataset train_ds = gen_concentric_circles(cfg.num_circles, cfg.points_per_circle,
                                                   cfg.noise_sigma, data_seed(cfg));
  out.eval_ds =
      gen_concentric_circles(cfg.num_circles, cfg.points_per_circle, 0.0, eval_data_seed(cfg));
  out.report = train_mlp(train_ds, out.eval_ds, to_loss_config(cfg), to_train_config(cfg));
  if (!out.report.aborted) {
    Matrix emb = embed_dataset(out.report.params, out.eval_ds.points);
    out.recall1 = recall_at_1(emb, out.eval_ds.labels);
    out.mean_distance = pairwise_distance_stats(emb).mean;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

double mean_similarity(const Matrix& emb) {
  // Mean of the full cosine matrix, diagonal included, matching what the
  // regularizer averages.
  int n = emb.rows();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int c = 0; c < emb.cols(); ++c) dot += emb(i, c) * emb(j, c);
      total += dot;
    }
  }
  return total / (static_cast<double>(n) * n);
}

std::vector<double> fractional_ranks(const std::vector<double>& v) {
  int n = static_cast<int>(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    double avg = (i + j) / 2.0 + 1.0;
    for (int t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> ra = fractional_ranks(a), rb = fractional_ranks(b);
  int n = static_cast<int>(a.size());
  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (int i = 0; i < n; ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

Matrix random_unit_rows(int n, int d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(n, d);
  for (int i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < d; ++j) {
      m(i, j) = gauss(rng);
      norm2 += m(i, j) * m(i, j);
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (int j = 0; j < d; ++j) m(i, j) *= inv;
  }
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- independent retrieval metrics for the brute-force comparison ----

std::vector<std::vector<int>> brute_ranked(const Matrix& emb) {
  int n = emb.rows();
  std::vector<std::vector<int>> out(n);
  for (int q = 0; q < n; ++q) {
    std::vector<std::pair<double, int>> order;
    for (int j = 0; j < n; ++j) {
      if (j == q) continue;
      double d2 = 0.0;
      for (int c = 0; c < emb.cols(); ++c) {
        double diff = emb(q, c) - emb(j, c);
        d2 += diff * diff;
      }
      order.emplace_back(d2, j);
    }
    std::sort(order.begin(), order.end());
    for (auto& [d, j] : order) out[q].push_back(j);
  }
  return out;
}

bool brute_metrics_match(uint64_t seed, std::string& why) {
  std::mt19937_64 rng(seed);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 10 + static_cast<int>(rng() % 91);
    int num_labels = 2 + static_cast<int>(rng() % 5);
    Matrix emb(n, 3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) emb(i, j) = dist(rng);
    std::vector<int> labels;
    for (int l = 0; l < num_labels; ++l) {
      labels.push_back(l);
      labels.push_back(l);
    }
    std::uniform_int_distribution<int> pick(0, num_labels - 1);
    while (static_cast<int>(labels.size()) < n) labels.push_back(pick(rng));
    std::shuffle(labels.begin(), labels.end(), rng);

    RetrievalResult r = rank_self_retrieval(emb, labels);
    auto ranked = brute_ranked(emb);
    if (r.ranked != ranked) {
      why = "ranking mismatch on trial " + std::to_string(trial);
      return false;
    }

    const std::vector<int> ks = {1, 2, 4, 8};
    std::vector<double> rec = recall_at_k(r, ks);
    for (size_t ki = 0; ki < ks.size(); ++ki) {
      int k = ks[ki];
      int hits = 0;
      for (int q = 0; q < n; ++q) {
        int limit = std::min<int>(k, static_cast<int>(ranked[q].size()));
        for (int i = 0; i < limit; ++i) {
          if (labels[ranked[q][i]] == labels[q]) {
            ++hits;
            break;
          }
        }
      }
      if (rec[ki] != static_cast<double>(hits) / n) {
        why = "recall@" + std::to_string(k) + " mismatch on trial " + std::to_string(trial);
        return false;
      }
    }

    ApSummary mine = mean_average_precision(r);
    double map_sum = 0.0, map_r_sum = 0.0;
    for (int q = 0; q < n; ++q) {
      int num_pos = 0;
      for (int j : ranked[q])
        if (labels[j] == labels[q]) ++num_pos;
      double ap = 0.0, ap_r = 0.0;
      int hits = 0;
      for (size_t i = 0; i < ranked[q].size(); ++i) {
        if (labels[ranked[q][i]] != labels[q]) continue;
        ++hits;
        double prec = static_cast<double>(hits) / static_cast<double>(i + 1);
        ap += prec;
        if (static_cast<int>(i) < num_pos) ap_r += prec;
      }
      map_sum += ap / num_pos;
      map_r_sum += ap_r / num_pos;
    }
    if (mine.map != map_sum / n || mine.map_at_r != map_r_sum / n) {
      why = "mean precision mismatch on trial " + std::to_string(trial);
      return false;
    }
    if (!(mine.map_at_r <= mine.map)) {
      why = "truncated mean precision exceeded the full one on trial " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  // 1: the tensor pipeline against the set-enumeration oracle.
  {
    auto t0 = std::chrono::steady_clock::now();
    OracleCheckOptions opt;
    opt.batches = 200;
    opt.tolerance = kOracleTolerance;
    CheckReport rep = run_oracle_equivalence(opt);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double worst = 0.0;
    for (const auto& item : rep.items) worst = std::max(worst, item.metric);
    report(1, rep.all_passed && secs < kOracleSecondsLimit,
           "oracle equivalence over 200 random batches, max deviation " + fmt(worst) + " (tol " +
               fmt(kOracleTolerance) + "), " + fmt(secs) + " s");
  }

  // 2: the product-form intersection stage is an affine map of the
  // ratio-form one on member entries when sizes are exactly k.
  {
    std::mt19937_64 rng(515151);
    int batches = 0, entries = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      int n = 12 + 4 * (trial % 3);
      int k = 4;
      Matrix emb = random_unit_rows(n, 3, rng());
      Tape tape;
      Matrix s = pairwise_cosine(tape.constant(emb)).value();
      OracleStages def = oracle_definition(s, k, 0.0);
      OracleStages pipe = oracle_pipeline(s, k, 0.0);
      bool exact_sizes = true;
      for (double sz : def.n_sizes) exact_sizes &= (sz == k);
      if (!exact_sizes) continue;  // a tie inflated a neighborhood
      ++batches;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (pipe.indicator(i, j) == 0.0) continue;
          double wd = def.w_tilde(i, j);
          double mapped = 0.5 * (wd + (n - 2.0 * k + k * wd) / (n - k));
          worst = std::max(worst, std::fabs(pipe.w_tilde(i, j) - mapped));
          ++entries;
        }
      }
    }
    report(2, batches >= 40 && worst < kAffineTolerance,
           "definition-to-pipeline affine relation on " + std::to_string(entries) +
               " member entries across " + std::to_string(batches) + " tie-free batches, max |dev| " +
               fmt(worst));
  }

  // 3: the gradient suite: exact straight-through backward scale, finite
  // difference agreement for the smooth terms, and the predicted signs on
  // the constructed batch.
  {
    CheckReport rep = run_gradient_checks(7);
    std::string failed;
    for (const auto& item : rep.items)
      if (!item.passed) failed += " " + item.name;
    report(3, rep.all_passed,
           rep.all_passed ? "backward scale exact, finite differences within 1e-4, sign table matches"
                          : "failing items:" + failed);
  }

  // 4: perfectly clustered geometry zeroes every loss component exactly.
  {
    Matrix emb(4, 2);
    emb(0, 0) = 1.0;
    emb(1, 0) = 1.0;
    emb(2, 1) = 1.0;
    emb(3, 1) = 1.0;
    Tape tape;
    Batch b = make_batch(tape.constant(emb), {0, 0, 1, 1});
    LossConfig cfg;
    cfg.k = 2;
    cfg.epsilon = 0.0;
    cfg.s_tilde = 0.5;  // mean(S) of this batch, so the regularizer sits at its target
    LossBreakdown parts = combined_loss(b, cfg);
    double l1 = loss_indicator_mse(b, cfg).value()(0, 0);
    double l2 = loss_intersection_mse(b, cfg).value()(0, 0);
    bool pass = parts.context.value()(0, 0) == 0.0 && l1 == 0.0 && l2 == 0.0 &&
                parts.contrast.value()(0, 0) == 0.0 && parts.reg.value()(0, 0) == 0.0 &&
                parts.total.value()(0, 0) == 0.0;
    report(4, pass, "clustered batch: contextual, indicator, intersection, margin and "
                    "regularizer terms are all exactly zero");
  }

  // 5: the three toy training arms reach their frozen recall thresholds.
  ToyRun full_run;
  {
    ExperimentConfig l1_cfg = toy_base();
    l1_cfg.variant = "indicator_mse";
    l1_cfg.lambda = 1.0;
    l1_cfg.gamma = 0.0;
    ToyRun l1 = run_toy(l1_cfg);

    ExperimentConfig ctx_cfg = toy_base();
    ctx_cfg.lambda = 1.0;
    ctx_cfg.gamma = 0.0;
    ctx_cfg.seed = 0;
    ctx_cfg.lr_decay_epochs = {};
    ctx_cfg.epochs = 2000;
    ctx_cfg.eval_every = 200;
    ToyRun ctx = run_toy(ctx_cfg);

    full_run = run_toy(toy_base());

    bool timing = l1.seconds < kPerRunSecondsLimit && ctx.seconds < kPerRunSecondsLimit &&
                  full_run.seconds < kPerRunSecondsLimit;
    bool pass = !l1.report.aborted && !ctx.report.aborted && !full_run.report.aborted &&
                l1.recall1 >= kRecallThresholdL1 && ctx.recall1 >= kRecallThresholdContextOnly &&
                full_run.recall1 >= kRecallThresholdFull && timing;
    report(5, pass,
           "recall@1 indicator-only " + fmt(l1.recall1) + " (>= " + fmt(kRecallThresholdL1) +
               "), contextual-only " + fmt(ctx.recall1) + " (>= " +
               fmt(kRecallThresholdContextOnly) + "), full " + fmt(full_run.recall1) + " (>= " +
               fmt(kRecallThresholdFull) + "); slowest run " +
               fmt(std::max({l1.seconds, ctx.seconds, full_run.seconds})) + " s");
  }

  // 6: with the regularizer active the final mean similarity sits at its
  // target.
  {
    bool ok = !full_run.report.aborted;
    double ms = 0.0;
    if (ok) {
      Matrix emb = embed_dataset(full_run.report.params, full_run.eval_ds.points);
      ms = mean_similarity(emb);
      ok = std::fabs(ms - 0.25) < kMeanSimilarityWindow;
    }
    report(6, ok, "final mean similarity " + fmt(ms) + " within " + fmt(kMeanSimilarityWindow) +
                      " of the 0.25 target");
  }

  // 7: removing the complement term changes the end-of-training spread; the
  // full intersection lands nearer the orthogonal-pair distance sqrt(2).
  {
    ExperimentConfig a = toy_base();
    a.seed = 15;
    ExperimentConfig b = a;
    b.variant = "drop_complement";
    ToyRun full15 = run_toy(a);
    ToyRun dc15 = run_toy(b);
    double root2 = std::sqrt(2.0);
    double gap_full = std::fabs(full15.mean_distance - root2);
    double gap_dc = std::fabs(dc15.mean_distance - root2);
    bool pass = !full15.report.aborted && !dc15.report.aborted && gap_full < gap_dc;
    report(7, pass, "mean pairwise distance " + fmt(full15.mean_distance) + " (full) vs " +
                        fmt(dc15.mean_distance) + " (shared-neighbor term only); distance to "
                        "sqrt(2): " + fmt(gap_full) + " vs " + fmt(gap_dc));
  }

  // 8: retrieval metrics equal an independent brute force, and the
  // truncated mean precision never exceeds the full one.
  {
    std::string why;
    bool pass = brute_metrics_match(606060, why);
    report(8, pass, pass ? "retrieval metrics equal the brute force on 30 instances up to n=100"
                         : why);
  }

  // 9: across the contextual-weight sweep, a lower final contextual loss
  // goes with a higher final recall.
  {
    std::vector<double> weights = {0.0, 0.4, 0.8, 1.0};
    std::vector<double> final_ctx, final_rec;
    bool runs_ok = true;
    for (double w : weights) {
      ExperimentConfig cfg = toy_base();
      cfg.seed = 7;
      cfg.lambda = w;
      cfg.gamma = 0.0;
      ToyRun run = run_toy(cfg);
      runs_ok &= !run.report.aborted && !run.report.steps.empty();
      if (!runs_ok) break;
      final_ctx.push_back(run.report.steps.back().context);
      final_rec.push_back(run.recall1);
    }
    double rho = 0.0;
    bool pass = runs_ok;
    if (pass) {
      for (double c : final_ctx) pass &= std::isfinite(c);
    }
    if (pass) {
      rho = spearman(final_ctx, final_rec);
      pass = rho < 0.0;
    }
    std::string detail = "rank correlation of final contextual loss and recall@1 " + fmt(rho);
    if (pass) {
      detail += " across weights {0, 0.4, 0.8, 1}";
    }
    report(9, pass, detail);
  }

  // 10: an identical rerun (same config, same seed, same out_dir, since the
  // directory is part of the hashed config) reproduces every byte.
  {
    namespace fs = std::filesystem;
    const std::string dir = "acc_det";
    const char* names[] = {"metrics.csv", "params.csv", "final_metrics.json", "dataset.csv"};
    ExperimentConfig cfg = toy_base();
    cfg.epochs = 3;
    cfg.out_dir = dir;

    auto run_once = [&]() {
      int rc = run_train(cfg);
      ExperimentConfig gen = cfg;
      run_gen_data(gen);
      std::vector<std::string> snap;
      for (const char* name : names) snap.push_back(read_file(dir + "/" + name));
      return std::make_pair(rc, snap);
    };
    auto [rc_a, snap_a] = run_once();
    fs::remove_all(dir);
    auto [rc_b, snap_b] = run_once();
    fs::remove_all(dir);

    bool pass = rc_a == rc_b;
    for (size_t i = 0; i < snap_a.size(); ++i)
      pass = pass && !snap_a[i].empty() && snap_a[i] == snap_b[i];
    report(10, pass, "reruns with the same config and seed are byte-identical across "
                     "metrics, checkpoint, summary and dataset files");
  }

  if (failures == 0) {
    std::printf("all %d criteria passed\n", 10);
    return 0;
  }
  std::printf("%d criteria failed\n", failures);
  return 1;
}
