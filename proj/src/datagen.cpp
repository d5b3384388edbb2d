#include "mvsl/datagen.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mvsl/csv.hpp"

namespace mvsl {
namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  throw ArgumentError("unknown activation");
}

Activation activation_from_name(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ArgumentError("unknown activation '" + s + "'");
}

Index informative_count_for(Index d, double fraction) {
  const auto raw = static_cast<Index>(std::llround(fraction * static_cast<double>(d)));
  return std::clamp<Index>(raw, 1, d);
}

}  // namespace

void ViewRecipe::validate() const {
  if (nonlinearity == Activation::Linear)
    throw ArgumentError("view recipe: nonlinearity must be sigmoid or tanh");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std) || !std::isfinite(noise_mean))
    throw ArgumentError("view recipe: noise mean/std must be finite, std >= 0");
}

void DataGenConfig::validate() const {
  if (classes < 2) throw ArgumentError("data config: need at least 2 classes");
  if (n < 2 * static_cast<Index>(classes))
    throw ArgumentError("data config: need n >= 2 * classes");
  if (base_dim < 1) throw ArgumentError("data config: base_dim must be positive");
  if (!(informative_fraction > 0.0) || !(informative_fraction <= 1.0))
    throw ArgumentError("data config: informative_fraction must be in (0, 1]");
  if (noise_dim < 0) throw ArgumentError("data config: noise_dim must be >= 0");
  if (segments < 1 || segment_width < 1)
    throw ArgumentError("data config: segments and segment_width must be positive");
  if (segments * segment_width < base_dim + noise_dim)
    throw ArgumentError(
        "data config: segments * segment_width must cover the view width " +
        std::to_string(base_dim + noise_dim));
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw ArgumentError("data config: train_fraction must be in (0, 1)");
  recipe1.validate();
  recipe2.validate();
}

void MultiViewDataset::validate() const {
  if (views.size() < 2) throw ArgumentError("dataset: need at least two views");
  if (labels.empty()) throw ArgumentError("dataset: empty");
  if (classes < 2) throw ArgumentError("dataset: need at least 2 classes");
  if (segs.size() != views.size())
    throw ArgumentError("dataset: one segmentation per view required");
  const auto rows = static_cast<Index>(labels.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].rows() != rows)
      throw ShapeError("dataset: view " + std::to_string(v + 1) + " has " +
                       std::to_string(views[v].rows()) + " rows, labels have " +
                       std::to_string(rows));
    if (segs[v].k < 1 || segs[v].d < 1 ||
        segs[v].k * segs[v].d < views[v].cols())
      throw ShapeError("dataset: segmentation of view " + std::to_string(v + 1) +
                       " does not cover its width");
  }
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw ArgumentError("dataset: label " + std::to_string(y) +
                          " outside [0, " + std::to_string(classes) + ")");
  if (n_train < 1 || n_train > rows)
    throw ArgumentError("dataset: train split must contain at least one row");
}

std::pair<Matrix, std::vector<int>> gen_base_classification(
    Index n, Index d, int c, double informative_fraction, std::uint64_t seed) {
  if (c < 2) throw ArgumentError("base table: need at least 2 classes");
  if (n < 2 * static_cast<Index>(c))
    throw ArgumentError("base table: need n >= 2 * classes");
  if (d < 1) throw ArgumentError("base table: dimension must be positive");
  if (!(informative_fraction > 0.0) || !(informative_fraction <= 1.0))
    throw ArgumentError("base table: informative_fraction must be in (0, 1]");

  const Index n_inf = informative_count_for(d, informative_fraction);
  if (c > 2 && n_inf < static_cast<Index>(c))
    throw ArgumentError(
        "base table: " + std::to_string(c) +
        " classes need at least as many informative features, got " +
        std::to_string(n_inf));

  // Class centers over the informative block. Two classes sit at +/-1 on
  // every informative feature; more classes get equidistant cycled patterns.
  Matrix centers = Matrix::Zero(c, n_inf);
  if (c == 2) {
    centers.row(0).setConstant(1.0);
    centers.row(1).setConstant(-1.0);
  } else {
    const double off = -1.0 / static_cast<double>(c - 1);
    for (int k = 0; k < c; ++k)
      for (Index j = 0; j < n_inf; ++j)
        centers(k, j) = (static_cast<Index>(k) == j % static_cast<Index>(c)) ? 1.0 : off;
  }

  Rng root(seed);

  // Balanced labels: counts differ by at most one, then a seeded row shuffle.
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % c);
  Rng label_rng = root.split("labels");
  label_rng.shuffle(labels);

  Rng feat_rng = root.split("features");
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) {
      const double mu = (j < n_inf) ? centers(y, j) : 0.0;
      x(i, j) = feat_rng.normal(mu, 1.0);
    }
  }
  return {std::move(x), std::move(labels)};
}

Matrix standardize_columns(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0)
    throw ArgumentError("standardize: empty matrix");
  Matrix out(x.rows(), x.cols());
  const double n = static_cast<double>(x.rows());
  for (Index j = 0; j < x.cols(); ++j) {
    const double mu = x.col(j).mean();
    const double var = (x.col(j).array() - mu).square().sum() / n;
    double sd = std::sqrt(var);
    if (sd < 1e-12) sd = 1.0;
    out.col(j) = (x.col(j).array() - mu) / sd;
  }
  return out;
}

std::pair<Matrix, std::vector<Index>> make_view(const Matrix& x_std,
                                                const ViewRecipe& recipe,
                                                Index noise_dim) {
  recipe.validate();
  if (noise_dim < 0) throw ArgumentError("make_view: noise_dim must be >= 0");
  if (x_std.rows() == 0 || x_std.cols() == 0)
    throw ArgumentError("make_view: empty base table");

  const Index n = x_std.rows();
  const Index d = x_std.cols();
  Matrix pre(n, d + noise_dim);
  if (recipe.nonlinearity == Activation::Sigmoid)
    pre.leftCols(d) = x_std.unaryExpr([](double v) { return stable_sigmoid(v); });
  else
    pre.leftCols(d) = x_std.array().tanh();

  Rng view_rng(recipe.view_seed);
  Rng noise_rng = view_rng.split("noise");
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < noise_dim; ++j)
      pre(i, d + j) = noise_rng.normal(recipe.noise_mean, recipe.noise_std);

  std::vector<Index> perm(static_cast<std::size_t>(d + noise_dim));
  std::iota(perm.begin(), perm.end(), Index{0});
  if (recipe.shuffle) {
    Rng shuffle_rng = view_rng.split("shuffle");
    shuffle_rng.shuffle(perm);
  }

  Matrix out(n, pre.cols());
  for (Index j = 0; j < pre.cols(); ++j)
    out.col(j) = pre.col(perm[static_cast<std::size_t>(j)]);
  return {std::move(out), std::move(perm)};
}

std::pair<Matrix, Matrix> make_two_views(const Matrix& x_base,
                                         const ViewRecipe& recipe1,
                                         const ViewRecipe& recipe2,
                                         Index noise_dim) {
  const Matrix x_std = standardize_columns(x_base);
  auto [v1, p1] = make_view(x_std, recipe1, noise_dim);
  auto [v2, p2] = make_view(x_std, recipe2, noise_dim);
  return {std::move(v1), std::move(v2)};
}

MultiViewDataset generate_dataset(const DataGenConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);

  auto [x_base, labels] = gen_base_classification(
      cfg.n, cfg.base_dim, cfg.classes, cfg.informative_fraction,
      root.split("base").root());
  const Matrix x_std = standardize_columns(x_base);

  MultiViewDataset ds;
  ds.recipes = {cfg.recipe1, cfg.recipe2};
  ds.recipes[0].view_seed = root.split("view1").root();
  ds.recipes[1].view_seed = root.split("view2").root();
  for (const auto& recipe : ds.recipes) {
    auto [view, perm] = make_view(x_std, recipe, cfg.noise_dim);
    ds.views.push_back(std::move(view));
    ds.perms.push_back(std::move(perm));
  }

  ds.labels = std::move(labels);
  ds.classes = cfg.classes;
  ds.segs = {SegmentationSpec{cfg.segments, cfg.segment_width},
             SegmentationSpec{cfg.segments, cfg.segment_width}};
  ds.n_train = std::clamp<Index>(
      static_cast<Index>(std::llround(cfg.train_fraction * static_cast<double>(cfg.n))),
      1, cfg.n - 1);
  ds.seed = cfg.seed;
  ds.base_dim = cfg.base_dim;
  ds.noise_dim = cfg.noise_dim;
  ds.informative_count = informative_count_for(cfg.base_dim, cfg.informative_fraction);
  ds.validate();
  return ds;
}

void save_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);

  KeyValues kv;
  auto put = [&kv](const std::string& k, const std::string& v) {
    kv.emplace_back(k, v);
  };
  put("format", "mvsl-dataset-1");
  put("views", std::to_string(ds.views.size()));
  put("samples", std::to_string(ds.n()));
  put("classes", std::to_string(ds.classes));
  put("train_rows", std::to_string(ds.n_train));
  put("seed", std::to_string(ds.seed));
  put("base_dim", std::to_string(ds.base_dim));
  put("noise_dim", std::to_string(ds.noise_dim));
  put("informative_count", std::to_string(ds.informative_count));
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    const std::string p = "view" + std::to_string(v + 1) + ".";
    put(p + "width", std::to_string(ds.views[v].cols()));
    put(p + "segments", std::to_string(ds.segs[v].k));
    put(p + "segment_width", std::to_string(ds.segs[v].d));
    if (v < ds.recipes.size()) {
      const auto& r = ds.recipes[v];
      put(p + "nonlinearity", activation_name(r.nonlinearity));
      put(p + "noise_mean", format_double(r.noise_mean));
      put(p + "noise_std", format_double(r.noise_std));
      put(p + "view_seed", std::to_string(r.view_seed));
      put(p + "shuffle", r.shuffle ? "1" : "0");
    }
    if (v < ds.perms.size() && !ds.perms[v].empty()) {
      std::string joined;
      for (std::size_t j = 0; j < ds.perms[v].size(); ++j) {
        if (j > 0) joined += ',';
        joined += std::to_string(ds.perms[v][j]);
      }
      put(p + "perm", joined);
    }
  }
  save_key_values(kv, dir / "manifest");

  for (std::size_t v = 0; v < ds.views.size(); ++v)
    save_matrix_csv(ds.views[v], dir / ("view" + std::to_string(v + 1) + ".csv"), "f");
  save_labels_csv(ds.labels, dir / "labels.csv");
}

MultiViewDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest";
  const KeyValues kv = load_key_values(manifest_path);
  auto get = [&](const std::string& key) -> const std::string& {
    return kv_get(kv, key, manifest_path);
  };
  auto get_ll = [&](const std::string& key) -> long long {
    const std::string& s = get(key);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw IoError(manifest_path.string() + ": key '" + key +
                    "' has non-integer value '" + s + "'");
    }
  };
  // Seeds use the full unsigned 64-bit range.
  auto get_ull = [&](const std::string& key) -> std::uint64_t {
    const std::string& s = get(key);
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw IoError(manifest_path.string() + ": key '" + key +
                    "' has non-integer value '" + s + "'");
    }
  };
  auto get_dbl = [&](const std::string& key) -> double {
    const std::string& s = get(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw IoError(manifest_path.string() + ": key '" + key +
                    "' has non-numeric value '" + s + "'");
    }
  };
  if (get("format") != "mvsl-dataset-1")
    throw IoError(manifest_path.string() + ": unsupported format '" +
                  get("format") + "'");

  MultiViewDataset ds;
  const auto n_views = static_cast<std::size_t>(get_ll("views"));
  const auto samples = static_cast<Index>(get_ll("samples"));
  ds.classes = static_cast<int>(get_ll("classes"));
  ds.n_train = static_cast<Index>(get_ll("train_rows"));
  ds.seed = get_ull("seed");
  ds.base_dim = static_cast<Index>(get_ll("base_dim"));
  ds.noise_dim = static_cast<Index>(get_ll("noise_dim"));
  ds.informative_count = static_cast<Index>(get_ll("informative_count"));

  for (std::size_t v = 1; v <= n_views; ++v) {
    const std::string p = "view" + std::to_string(v) + ".";
    Matrix view = load_matrix_csv(dir / ("view" + std::to_string(v) + ".csv"));
    if (view.rows() != samples)
      throw IoError((dir / ("view" + std::to_string(v) + ".csv")).string() +
                    ": expected " + std::to_string(samples) + " rows, got " +
                    std::to_string(view.rows()));
    if (view.cols() != static_cast<Index>(get_ll(p + "width")))
      throw IoError((dir / ("view" + std::to_string(v) + ".csv")).string() +
                    ": width does not match manifest");
    ds.views.push_back(std::move(view));
    ds.segs.push_back(SegmentationSpec{static_cast<Index>(get_ll(p + "segments")),
                                       static_cast<Index>(get_ll(p + "segment_width"))});
    if (kv_has(kv, p + "nonlinearity")) {
      ViewRecipe r;
      r.nonlinearity = activation_from_name(get(p + "nonlinearity"));
      r.noise_mean = get_dbl(p + "noise_mean");
      r.noise_std = get_dbl(p + "noise_std");
      r.view_seed = get_ull(p + "view_seed");
      r.shuffle = get(p + "shuffle") == "1";
      ds.recipes.push_back(r);
    }
    if (kv_has(kv, p + "perm")) {
      std::vector<Index> perm;
      const std::string& joined = get(p + "perm");
      std::size_t pos = 0;
      while (pos <= joined.size()) {
        const auto comma = joined.find(',', pos);
        const auto end = (comma == std::string::npos) ? joined.size() : comma;
        const std::string item = joined.substr(pos, end - pos);
        try {
          std::size_t used = 0;
          perm.push_back(static_cast<Index>(std::stoll(item, &used)));
          if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
          throw IoError(manifest_path.string() + ": key '" + p +
                        "perm' has non-integer entry '" + item + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      ds.perms.push_back(std::move(perm));
    }
  }

  ds.labels = load_labels_csv(dir / "labels.csv");
  if (static_cast<Index>(ds.labels.size()) != samples)
    throw IoError((dir / "labels.csv").string() + ": expected " +
                  std::to_string(samples) + " labels, got " +
                  std::to_string(ds.labels.size()));
  ds.validate();
  return ds;
}

}  // namespace mvsl
