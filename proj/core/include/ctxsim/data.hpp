#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxsim/matrix.hpp"

namespace ctxsim {

struct DatasetMeta {
  int num_circles = 0;
  int points_per_circle = 0;
  double noise_sigma = 0.0;
  uint64_t seed = 0;
};

struct LabeledDataset {
  Matrix points;            // m x 2
  std::vector<int> labels;  // size m, circle index
  DatasetMeta meta;

  int size() const { return points.rows(); }
};

// Circle c has radius (c + 1) / num_circles; angles are uniform and isotropic
// Gaussian noise of the given sigma is added per point. Angles are drawn for
// every point before any noise, so datasets that differ only in noise_sigma
// share the same underlying clean points at equal seeds.
LabeledDataset gen_concentric_circles(int num_circles, int points_per_circle,
                                      double noise_sigma, uint64_t seed);

struct SamplerPlan {
  std::vector<std::vector<int>> batches;  // dataset indices, label-major
  int labels_per_batch = 0;
  int samples_per_label = 0;
  int batches_per_epoch = 0;
};

// Each batch draws labels_per_batch labels without replacement, then
// samples_per_label members of each label without replacement. One epoch is
// max(1, m / batch_size) batches.
SamplerPlan m_per_class_sampler(const LabeledDataset& ds, int labels_per_batch,
                                int samples_per_label, int epochs, uint64_t seed);

// Header "x,y,label"; any leading '#' lines are ignored on read.
void write_dataset_csv(const LabeledDataset& ds, const std::string& path,
                       const std::string& comment = "");
LabeledDataset read_dataset_csv(const std::string& path);

}  // namespace ctxsim
