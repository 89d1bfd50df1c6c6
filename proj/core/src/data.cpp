#include "ctxsim/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ctxsim {

LabeledDataset gen_concentric_circles(int num_circles, int points_per_circle,
                                      double noise_sigma, uint64_t seed) {
  if (num_circles < 1 || points_per_circle < 1) {
    throw std::invalid_argument("gen_concentric_circles: need at least one circle and point");
  }
  if (noise_sigma < 0.0) {
    throw std::invalid_argument("gen_concentric_circles: noise_sigma must be >= 0");
  }
  int m = num_circles * points_per_circle;
  LabeledDataset ds;
  ds.points = Matrix(m, 2);
  ds.labels.resize(m);
  ds.meta = {num_circles, points_per_circle, noise_sigma, seed};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  std::vector<double> angles(m);
  for (int i = 0; i < m; ++i) angles[i] = angle(rng);

  for (int c = 0; c < num_circles; ++c) {
    double radius = static_cast<double>(c + 1) / num_circles;
    for (int p = 0; p < points_per_circle; ++p) {
      int i = c * points_per_circle + p;
      ds.points(i, 0) = radius * std::cos(angles[i]);
      ds.points(i, 1) = radius * std::sin(angles[i]);
      ds.labels[i] = c;
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < m; ++i) {
    ds.points(i, 0) += noise_sigma * noise(rng);
    ds.points(i, 1) += noise_sigma * noise(rng);
  }
  return ds;
}

SamplerPlan m_per_class_sampler(const LabeledDataset& ds, int labels_per_batch,
                                int samples_per_label, int epochs, uint64_t seed) {
  if (labels_per_batch < 1 || samples_per_label < 1 || epochs < 1) {
    throw std::invalid_argument("m_per_class_sampler: counts must be positive");
  }
  int num_labels = 0;
  for (int l : ds.labels) num_labels = std::max(num_labels, l + 1);
  std::vector<std::vector<int>> by_label(num_labels);
  for (int i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] < 0) throw std::invalid_argument("m_per_class_sampler: negative label");
    by_label[ds.labels[i]].push_back(i);
  }
  if (labels_per_batch > num_labels) {
    throw std::invalid_argument("m_per_class_sampler: labels_per_batch exceeds label count");
  }
  for (int l = 0; l < num_labels; ++l) {
    if (static_cast<int>(by_label[l].size()) < samples_per_label) {
      throw std::invalid_argument("m_per_class_sampler: label " + std::to_string(l) +
                                  " has fewer than samples_per_label members");
    }
  }

  SamplerPlan plan;
  plan.labels_per_batch = labels_per_batch;
  plan.samples_per_label = samples_per_label;
  int batch_size = labels_per_batch * samples_per_label;
  plan.batches_per_epoch = std::max(1, ds.size() / batch_size);

  std::mt19937_64 rng(seed);
  std::vector<int> label_order(num_labels);
  for (int l = 0; l < num_labels; ++l) label_order[l] = l;

  for (int e = 0; e < epochs; ++e) {
    for (int b = 0; b < plan.batches_per_epoch; ++b) {
      std::shuffle(label_order.begin(), label_order.end(), rng);
      std::vector<int> batch;
      batch.reserve(batch_size);
      for (int li = 0; li < labels_per_batch; ++li) {
        std::vector<int> members = by_label[label_order[li]];
        std::shuffle(members.begin(), members.end(), rng);
        for (int s = 0; s < samples_per_label; ++s) batch.push_back(members[s]);
      }
      plan.batches.push_back(std::move(batch));
    }
  }
  return plan;
}

void write_dataset_csv(const LabeledDataset& ds, const std::string& path,
                       const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "x,y,label\n";
  char buf[64];
  for (int i = 0; i < ds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", ds.points(i, 0));
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", ds.points(i, 1));
    out << buf << "," << ds.labels[i] << "\n";
  }
  if (!out) throw std::runtime_error("write_dataset_csv: write failed for " + path);
}

LabeledDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  std::string line;
  bool header_seen = false;
  std::vector<std::array<double, 2>> pts;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "x,y,label") {
        throw std::runtime_error("read_dataset_csv: unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string fx, fy, fl;
    if (!std::getline(ss, fx, ',') || !std::getline(ss, fy, ',') || !std::getline(ss, fl)) {
      throw std::runtime_error("read_dataset_csv: malformed row '" + line + "'");
    }
    pts.push_back({std::stod(fx), std::stod(fy)});
    labels.push_back(std::stoi(fl));
  }
  if (!header_seen) throw std::runtime_error("read_dataset_csv: missing header in " + path);

  LabeledDataset ds;
  ds.points = Matrix(static_cast<int>(pts.size()), 2);
  for (size_t i = 0; i < pts.size(); ++i) {
    ds.points(static_cast<int>(i), 0) = pts[i][0];
    ds.points(static_cast<int>(i), 1) = pts[i][1];
  }
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace ctxsim
