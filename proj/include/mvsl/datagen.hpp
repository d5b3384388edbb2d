#pragma once

// Synthetic two-view classification data. A labeled Gaussian-mixture base
// table is standardized per feature, pushed through a per-view nonlinearity,
// padded with label-independent Gaussian noise columns, and (optionally)
// column-shuffled per view. All randomness is derived from explicit seeds.

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "mvsl/coattention.hpp"
#include "mvsl/common.hpp"
#include "mvsl/mlp.hpp"
#include "mvsl/rng.hpp"

namespace mvsl {

struct ViewRecipe {
  Activation nonlinearity = Activation::Sigmoid;  // Sigmoid or Tanh
  double noise_mean = 0.0;
  double noise_std = 0.5;
  std::uint64_t view_seed = 0;  // drives the noise draws and the shuffle
  bool shuffle = true;          // false keeps the identity column order
  void validate() const;
};

struct DataGenConfig {
  Index n = 2000;
  Index base_dim = 100;
  int classes = 2;
  double informative_fraction = 0.2;  // in (0, 1]
  Index noise_dim = 10;
  ViewRecipe recipe1{Activation::Sigmoid, 0.0, 0.5, 0, true};
  ViewRecipe recipe2{Activation::Tanh, 1.0, 0.7, 0, true};
  Index segments = 11;       // k: segments per sample, both views
  Index segment_width = 10;  // d: features per segment, both views
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  void validate() const;
};

struct MultiViewDataset {
  std::vector<Matrix> views;  // each n x width_i, rows are samples
  std::vector<int> labels;    // size n, values in [0, classes)
  int classes = 2;
  std::vector<SegmentationSpec> segs;  // per-view segmentation
  Index n_train = 0;  // rows [0, n_train) train, [n_train, n) test

  // Provenance of the generating process.
  std::uint64_t seed = 0;
  Index base_dim = 0;
  Index noise_dim = 0;
  Index informative_count = 0;
  std::vector<ViewRecipe> recipes;
  // Column j of view v came from pre-shuffle column perms[v][j]. Pre-shuffle
  // order is the base features followed by the noise block.
  std::vector<std::vector<Index>> perms;

  Index n() const { return static_cast<Index>(labels.size()); }
  Index n_test() const { return n() - n_train; }
  void validate() const;
};

// Labeled mixture base table: class counts differ by at most one; the first
// informative columns are drawn around per-class centers (+/-1 for two
// classes, a regular simplex otherwise) and the rest are standard normal.
std::pair<Matrix, std::vector<int>> gen_base_classification(
    Index n, Index d, int c, double informative_fraction, std::uint64_t seed);

// Per-column zero mean, unit deviation; deviations below 1e-12 divide by 1.
Matrix standardize_columns(const Matrix& x);

// One view from a standardized base table; returns the view and the column
// permutation applied (identity when recipe.shuffle is false).
std::pair<Matrix, std::vector<Index>> make_view(const Matrix& x_std,
                                                const ViewRecipe& recipe,
                                                Index noise_dim);

std::pair<Matrix, Matrix> make_two_views(const Matrix& x_base,
                                         const ViewRecipe& recipe1,
                                         const ViewRecipe& recipe2,
                                         Index noise_dim);

MultiViewDataset generate_dataset(const DataGenConfig& cfg);

// Directory layout: view1.csv, view2.csv, ... labels.csv, manifest.
void save_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir);
MultiViewDataset load_dataset(const std::filesystem::path& dir);

}  // namespace mvsl
