// Command-line front end: dataset generation, training, evaluation,
// attention export, the fusion ablation, the regularizer comparison, and
// hyper-parameter sweeps. Configuration is resolved as defaults, then the
// JSON config file, then explicit flags (flags win). Every run validates its
// inputs before writing anything and leaves a manifest echoing the fully
// resolved configuration.
//
// Exit codes: 0 success, 1 invalid usage/configuration/input files,
// 2 runtime failure (divergence or a non-finite objective).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mvsl/csv.hpp"
#include "mvsl/datagen.hpp"
#include "mvsl/eval.hpp"
#include "mvsl/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvsl;

namespace {

// ---------------------------------------------------------------------------
// Enum <-> string
// ---------------------------------------------------------------------------

FusionMode parse_fusion(const std::string& s) {
  if (s == "shared_plus_residual") return FusionMode::SharedPlusResidual;
  if (s == "shared_copied") return FusionMode::SharedCopied;
  throw ConfigError("unknown fusion mode '" + s +
                    "' (expected shared_plus_residual or shared_copied)");
}

std::string fusion_name(FusionMode m) {
  return m == FusionMode::SharedPlusResidual ? "shared_plus_residual"
                                             : "shared_copied";
}

ReconKind parse_recon(const std::string& s) {
  if (s == "full") return ReconKind::Full;
  if (s == "same_view") return ReconKind::SameView;
  if (s == "cross_view") return ReconKind::CrossView;
  if (s == "code_l1") return ReconKind::CodeAlignment;
  throw ConfigError("unknown reconstruction objective '" + s +
                    "' (expected full, same_view, cross_view or code_l1)");
}

std::string recon_name(ReconKind k) {
  switch (k) {
    case ReconKind::Full: return "full";
    case ReconKind::SameView: return "same_view";
    case ReconKind::CrossView: return "cross_view";
    case ReconKind::CodeAlignment: return "code_l1";
  }
  return "full";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s == "all") return Split::All;
  throw ConfigError("unknown split '" + s + "' (expected train, test or all)");
}

Activation parse_nonlinearity(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown nonlinearity '" + s + "' (expected sigmoid or tanh)");
}

std::string nonlinearity_name(Activation a) {
  return a == Activation::Sigmoid ? "sigmoid" : "tanh";
}

// ---------------------------------------------------------------------------
// JSON configuration file
// ---------------------------------------------------------------------------

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object())
    throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key))
      throw ConfigError("config: unknown key '" + where + "." + key + "'");
}

double num(const json& v, const std::string& where) {
  if (!v.is_number())
    throw ConfigError("config: '" + where + "' must be a number");
  return v.get<double>();
}

Index idx(const json& v, const std::string& where) {
  if (!v.is_number_integer())
    throw ConfigError("config: '" + where + "' must be an integer");
  return v.get<Index>();
}

std::uint64_t u64(const json& v, const std::string& where) {
  if (!v.is_number_integer() ||
      (!v.is_number_unsigned() && v.get<long long>() < 0))
    throw ConfigError("config: '" + where + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool boolean(const json& v, const std::string& where) {
  if (!v.is_boolean())
    throw ConfigError("config: '" + where + "' must be true or false");
  return v.get<bool>();
}

std::string str(const json& v, const std::string& where) {
  if (!v.is_string())
    throw ConfigError("config: '" + where + "' must be a string");
  return v.get<std::string>();
}

void apply_view_json(const json& obj, ViewRecipe& r, const std::string& where) {
  check_keys(obj, {"nonlinearity", "noise_mean", "noise_std", "shuffle"}, where);
  if (obj.contains("nonlinearity"))
    r.nonlinearity =
        parse_nonlinearity(str(obj["nonlinearity"], where + ".nonlinearity"));
  if (obj.contains("noise_mean"))
    r.noise_mean = num(obj["noise_mean"], where + ".noise_mean");
  if (obj.contains("noise_std"))
    r.noise_std = num(obj["noise_std"], where + ".noise_std");
  if (obj.contains("shuffle")) r.shuffle = boolean(obj["shuffle"], where + ".shuffle");
}

void apply_data_json(const json& obj, DataGenConfig& cfg) {
  check_keys(obj,
             {"n", "base_dim", "classes", "informative_fraction", "noise_dim",
              "segments", "segment_width", "train_fraction", "seed", "view1",
              "view2"},
             "data");
  if (obj.contains("n")) cfg.n = idx(obj["n"], "data.n");
  if (obj.contains("base_dim")) cfg.base_dim = idx(obj["base_dim"], "data.base_dim");
  if (obj.contains("classes"))
    cfg.classes = static_cast<int>(idx(obj["classes"], "data.classes"));
  if (obj.contains("informative_fraction"))
    cfg.informative_fraction =
        num(obj["informative_fraction"], "data.informative_fraction");
  if (obj.contains("noise_dim")) cfg.noise_dim = idx(obj["noise_dim"], "data.noise_dim");
  if (obj.contains("segments")) cfg.segments = idx(obj["segments"], "data.segments");
  if (obj.contains("segment_width"))
    cfg.segment_width = idx(obj["segment_width"], "data.segment_width");
  if (obj.contains("train_fraction"))
    cfg.train_fraction = num(obj["train_fraction"], "data.train_fraction");
  if (obj.contains("seed")) cfg.seed = u64(obj["seed"], "data.seed");
  if (obj.contains("view1")) apply_view_json(obj["view1"], cfg.recipe1, "data.view1");
  if (obj.contains("view2")) apply_view_json(obj["view2"], cfg.recipe2, "data.view2");
}

void apply_model_json(const json& obj, ModelConfig& cfg) {
  check_keys(obj,
             {"code_dim", "attention_dim", "embed_hidden", "encoder_hidden",
              "decoder_hidden", "disc_hidden", "classifier_hidden",
              "per_view_heads"},
             "model");
  if (obj.contains("code_dim")) cfg.code_dim = idx(obj["code_dim"], "model.code_dim");
  if (obj.contains("attention_dim"))
    cfg.attention_dim = idx(obj["attention_dim"], "model.attention_dim");
  if (obj.contains("embed_hidden"))
    cfg.embed_hidden = idx(obj["embed_hidden"], "model.embed_hidden");
  if (obj.contains("encoder_hidden"))
    cfg.encoder_hidden = idx(obj["encoder_hidden"], "model.encoder_hidden");
  if (obj.contains("decoder_hidden"))
    cfg.decoder_hidden = idx(obj["decoder_hidden"], "model.decoder_hidden");
  if (obj.contains("disc_hidden"))
    cfg.disc_hidden = idx(obj["disc_hidden"], "model.disc_hidden");
  if (obj.contains("classifier_hidden"))
    cfg.classifier_hidden = idx(obj["classifier_hidden"], "model.classifier_hidden");
  if (obj.contains("per_view_heads"))
    cfg.per_view_heads = boolean(obj["per_view_heads"], "model.per_view_heads");
}

void apply_training_json(const json& obj, TrainingConfig& cfg) {
  check_keys(obj,
             {"iterations", "t1", "t2", "t3", "alpha", "beta", "lr0", "decay",
              "momentum", "batch_size", "seed", "eval_every", "non_saturating",
              "stop_grad_residual", "squared_error_classifier",
              "semi_supervised", "labeled_fraction", "fusion", "recon"},
             "training");
  if (obj.contains("iterations"))
    cfg.iterations = idx(obj["iterations"], "training.iterations");
  if (obj.contains("t1")) cfg.t1 = static_cast<int>(idx(obj["t1"], "training.t1"));
  if (obj.contains("t2")) cfg.t2 = static_cast<int>(idx(obj["t2"], "training.t2"));
  if (obj.contains("t3")) cfg.t3 = static_cast<int>(idx(obj["t3"], "training.t3"));
  if (obj.contains("alpha")) cfg.alpha = num(obj["alpha"], "training.alpha");
  if (obj.contains("beta")) cfg.beta = num(obj["beta"], "training.beta");
  if (obj.contains("lr0")) cfg.lr0 = num(obj["lr0"], "training.lr0");
  if (obj.contains("decay")) cfg.decay = num(obj["decay"], "training.decay");
  if (obj.contains("momentum")) cfg.momentum = num(obj["momentum"], "training.momentum");
  if (obj.contains("batch_size"))
    cfg.batch_size = idx(obj["batch_size"], "training.batch_size");
  if (obj.contains("seed")) cfg.seed = u64(obj["seed"], "training.seed");
  if (obj.contains("eval_every"))
    cfg.eval_every = idx(obj["eval_every"], "training.eval_every");
  if (obj.contains("non_saturating"))
    cfg.non_saturating = boolean(obj["non_saturating"], "training.non_saturating");
  if (obj.contains("stop_grad_residual"))
    cfg.stop_grad_residual =
        boolean(obj["stop_grad_residual"], "training.stop_grad_residual");
  if (obj.contains("squared_error_classifier"))
    cfg.squared_error_classifier = boolean(obj["squared_error_classifier"],
                                           "training.squared_error_classifier");
  if (obj.contains("semi_supervised"))
    cfg.semi_supervised = boolean(obj["semi_supervised"], "training.semi_supervised");
  if (obj.contains("labeled_fraction"))
    cfg.labeled_fraction = num(obj["labeled_fraction"], "training.labeled_fraction");
  if (obj.contains("fusion"))
    cfg.fusion = parse_fusion(str(obj["fusion"], "training.fusion"));
  if (obj.contains("recon"))
    cfg.recon = parse_recon(str(obj["recon"], "training.recon"));
}

void apply_suite_json(const json& obj, SuiteConfig& cfg) {
  check_keys(obj,
             {"checkpoint_every", "posthoc_steps", "posthoc_hidden", "posthoc_lr"},
             "suite");
  if (obj.contains("checkpoint_every"))
    cfg.checkpoint_every = idx(obj["checkpoint_every"], "suite.checkpoint_every");
  if (obj.contains("posthoc_steps"))
    cfg.posthoc_steps = idx(obj["posthoc_steps"], "suite.posthoc_steps");
  if (obj.contains("posthoc_hidden"))
    cfg.posthoc_hidden = idx(obj["posthoc_hidden"], "suite.posthoc_hidden");
  if (obj.contains("posthoc_lr"))
    cfg.posthoc_lr = num(obj["posthoc_lr"], "suite.posthoc_lr");
}

void apply_sweep_json(const json& obj, std::string& parameter,
                      std::vector<double>& values) {
  check_keys(obj, {"parameter", "values"}, "sweep");
  if (obj.contains("parameter")) parameter = str(obj["parameter"], "sweep.parameter");
  if (obj.contains("values")) {
    if (!obj["values"].is_array())
      throw ConfigError("config: 'sweep.values' must be an array of numbers");
    values.clear();
    for (const auto& v : obj["values"]) values.push_back(num(v, "sweep.values"));
  }
}

json load_config_file(const std::string& file) {
  if (file.empty()) return json::object();
  std::ifstream in(file);
  if (!in) throw IoError(file + ": cannot open config file");
  json obj;
  try {
    obj = json::parse(in, nullptr, /*allow_exceptions=*/true,
                      /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(file + ": " + e.what());
  }
  check_keys(obj, {"data", "model", "training", "suite", "sweep"}, "config");
  return obj;
}

json config_section(const json& cfg, const std::string& key) {
  return cfg.contains(key) ? cfg.at(key) : json::object();
}

// ---------------------------------------------------------------------------
// Flag binding. CLI11 writes parsed flags into a scratch copy of each config
// struct; sync_* then copies exactly the explicitly passed fields onto the
// resolved config, so precedence is defaults < config file < flags.
// ---------------------------------------------------------------------------

struct ModelFlags {
  ModelConfig scratch;

  void bind(CLI::App* cmd) {
    cmd->add_option("--code-dim", scratch.code_dim, "shared code width");
    cmd->add_option("--attention-dim", scratch.attention_dim, "co-attention width");
    cmd->add_option("--embed-hidden", scratch.embed_hidden,
                    "segment embedder hidden width (0 = segment width)");
    cmd->add_option("--encoder-hidden", scratch.encoder_hidden, "encoder hidden width");
    cmd->add_option("--decoder-hidden", scratch.decoder_hidden, "decoder hidden width");
    cmd->add_option("--disc-hidden", scratch.disc_hidden,
                    "discriminator hidden width");
    cmd->add_option("--classifier-hidden", scratch.classifier_hidden,
                    "classifier hidden width");
    cmd->add_flag("--per-view-heads", scratch.per_view_heads,
                  "add the two per-view semi-supervised heads");
  }

  void sync(const CLI::App* cmd, ModelConfig& out) const {
    if (cmd->count("--code-dim")) out.code_dim = scratch.code_dim;
    if (cmd->count("--attention-dim")) out.attention_dim = scratch.attention_dim;
    if (cmd->count("--embed-hidden")) out.embed_hidden = scratch.embed_hidden;
    if (cmd->count("--encoder-hidden")) out.encoder_hidden = scratch.encoder_hidden;
    if (cmd->count("--decoder-hidden")) out.decoder_hidden = scratch.decoder_hidden;
    if (cmd->count("--disc-hidden")) out.disc_hidden = scratch.disc_hidden;
    if (cmd->count("--classifier-hidden"))
      out.classifier_hidden = scratch.classifier_hidden;
    if (cmd->count("--per-view-heads")) out.per_view_heads = scratch.per_view_heads;
  }
};

struct TrainingFlags {
  TrainingConfig scratch;
  std::string fusion;
  std::string recon;

  void bind(CLI::App* cmd) {
    cmd->add_option("--iterations", scratch.iterations, "outer iterations");
    cmd->add_option("--t1", scratch.t1, "discriminator steps per iteration");
    cmd->add_option("--t2", scratch.t2, "autoencoder steps per iteration");
    cmd->add_option("--t3", scratch.t3, "classifier steps per iteration");
    cmd->add_option("--alpha", scratch.alpha, "reconstruction weight");
    cmd->add_option("--beta", scratch.beta, "classification weight");
    cmd->add_option("--lr0", scratch.lr0, "initial learning rate");
    cmd->add_option("--decay", scratch.decay, "per-epoch learning-rate decay");
    cmd->add_option("--momentum", scratch.momentum, "momentum coefficient");
    cmd->add_option("--batch-size", scratch.batch_size, "minibatch size");
    cmd->add_option("--seed", scratch.seed, "training seed");
    cmd->add_option("--eval-every", scratch.eval_every,
                    "held-out metric cadence (0 = never)");
    cmd->add_flag("--non-saturating", scratch.non_saturating,
                  "use the non-saturating encoder surrogate");
    cmd->add_flag("--stop-grad-residual", scratch.stop_grad_residual,
                  "cut gradients through the residual blend");
    cmd->add_flag("--squared-error", scratch.squared_error_classifier,
                  "squared-error classifier objective");
    cmd->add_flag("--semi-supervised", scratch.semi_supervised,
                  "two-head objective over partially labeled batches");
    cmd->add_option("--labeled-fraction", scratch.labeled_fraction,
                    "labeled share of the train split");
    cmd->add_option("--fusion", fusion, "shared_plus_residual or shared_copied");
    cmd->add_option("--recon", recon, "full, same_view, cross_view or code_l1");
  }

  void sync(const CLI::App* cmd, TrainingConfig& out) const {
    if (cmd->count("--iterations")) out.iterations = scratch.iterations;
    if (cmd->count("--t1")) out.t1 = scratch.t1;
    if (cmd->count("--t2")) out.t2 = scratch.t2;
    if (cmd->count("--t3")) out.t3 = scratch.t3;
    if (cmd->count("--alpha")) out.alpha = scratch.alpha;
    if (cmd->count("--beta")) out.beta = scratch.beta;
    if (cmd->count("--lr0")) out.lr0 = scratch.lr0;
    if (cmd->count("--decay")) out.decay = scratch.decay;
    if (cmd->count("--momentum")) out.momentum = scratch.momentum;
    if (cmd->count("--batch-size")) out.batch_size = scratch.batch_size;
    if (cmd->count("--seed")) out.seed = scratch.seed;
    if (cmd->count("--eval-every")) out.eval_every = scratch.eval_every;
    if (cmd->count("--non-saturating")) out.non_saturating = scratch.non_saturating;
    if (cmd->count("--stop-grad-residual"))
      out.stop_grad_residual = scratch.stop_grad_residual;
    if (cmd->count("--squared-error"))
      out.squared_error_classifier = scratch.squared_error_classifier;
    if (cmd->count("--semi-supervised"))
      out.semi_supervised = scratch.semi_supervised;
    if (cmd->count("--labeled-fraction"))
      out.labeled_fraction = scratch.labeled_fraction;
    if (cmd->count("--fusion")) out.fusion = parse_fusion(fusion);
    if (cmd->count("--recon")) out.recon = parse_recon(recon);
  }
};

struct SuiteFlags {
  SuiteConfig scratch;

  void bind(CLI::App* cmd) {
    cmd->add_option("--checkpoint-every", scratch.checkpoint_every,
                    "evaluation cadence in outer iterations");
    cmd->add_option("--posthoc-steps", scratch.posthoc_steps,
                    "probe-classifier fit steps per checkpoint");
    cmd->add_option("--posthoc-hidden", scratch.posthoc_hidden,
                    "probe-classifier hidden width");
    cmd->add_option("--posthoc-lr", scratch.posthoc_lr,
                    "probe-classifier learning rate");
  }

  void sync(const CLI::App* cmd, SuiteConfig& out) const {
    if (cmd->count("--checkpoint-every"))
      out.checkpoint_every = scratch.checkpoint_every;
    if (cmd->count("--posthoc-steps")) out.posthoc_steps = scratch.posthoc_steps;
    if (cmd->count("--posthoc-hidden")) out.posthoc_hidden = scratch.posthoc_hidden;
    if (cmd->count("--posthoc-lr")) out.posthoc_lr = scratch.posthoc_lr;
  }
};

struct DataFlags {
  DataGenConfig scratch;
  std::string view1_nonlinearity;
  std::string view2_nonlinearity;
  bool view1_no_shuffle = false;
  bool view2_no_shuffle = false;

  void bind(CLI::App* cmd) {
    cmd->add_option("--n", scratch.n, "sample count");
    cmd->add_option("--base-dim", scratch.base_dim, "base feature count");
    cmd->add_option("--classes", scratch.classes, "class count");
    cmd->add_option("--informative-fraction", scratch.informative_fraction,
                    "share of base features that carry the labels");
    cmd->add_option("--noise-dim", scratch.noise_dim,
                    "appended noise columns per view");
    cmd->add_option("--segments", scratch.segments, "segments per sample");
    cmd->add_option("--segment-width", scratch.segment_width, "features per segment");
    cmd->add_option("--train-fraction", scratch.train_fraction,
                    "share of samples in the train split");
    cmd->add_option("--seed", scratch.seed, "generation seed");
    cmd->add_option("--view1-nonlinearity", view1_nonlinearity, "sigmoid or tanh");
    cmd->add_option("--view2-nonlinearity", view2_nonlinearity, "sigmoid or tanh");
    cmd->add_option("--view1-noise-mean", scratch.recipe1.noise_mean,
                    "view-1 noise mean");
    cmd->add_option("--view1-noise-std", scratch.recipe1.noise_std,
                    "view-1 noise std");
    cmd->add_option("--view2-noise-mean", scratch.recipe2.noise_mean,
                    "view-2 noise mean");
    cmd->add_option("--view2-noise-std", scratch.recipe2.noise_std,
                    "view-2 noise std");
    cmd->add_flag("--view1-no-shuffle", view1_no_shuffle,
                  "keep view-1 columns in generation order");
    cmd->add_flag("--view2-no-shuffle", view2_no_shuffle,
                  "keep view-2 columns in generation order");
  }

  void sync(const CLI::App* cmd, DataGenConfig& out) const {
    if (cmd->count("--n")) out.n = scratch.n;
    if (cmd->count("--base-dim")) out.base_dim = scratch.base_dim;
    if (cmd->count("--classes")) out.classes = scratch.classes;
    if (cmd->count("--informative-fraction"))
      out.informative_fraction = scratch.informative_fraction;
    if (cmd->count("--noise-dim")) out.noise_dim = scratch.noise_dim;
    if (cmd->count("--segments")) out.segments = scratch.segments;
    if (cmd->count("--segment-width")) out.segment_width = scratch.segment_width;
    if (cmd->count("--train-fraction")) out.train_fraction = scratch.train_fraction;
    if (cmd->count("--seed")) out.seed = scratch.seed;
    if (cmd->count("--view1-nonlinearity"))
      out.recipe1.nonlinearity = parse_nonlinearity(view1_nonlinearity);
    if (cmd->count("--view2-nonlinearity"))
      out.recipe2.nonlinearity = parse_nonlinearity(view2_nonlinearity);
    if (cmd->count("--view1-noise-mean"))
      out.recipe1.noise_mean = scratch.recipe1.noise_mean;
    if (cmd->count("--view1-noise-std"))
      out.recipe1.noise_std = scratch.recipe1.noise_std;
    if (cmd->count("--view2-noise-mean"))
      out.recipe2.noise_mean = scratch.recipe2.noise_mean;
    if (cmd->count("--view2-noise-std"))
      out.recipe2.noise_std = scratch.recipe2.noise_std;
    if (cmd->count("--view1-no-shuffle")) out.recipe1.shuffle = !view1_no_shuffle;
    if (cmd->count("--view2-no-shuffle")) out.recipe2.shuffle = !view2_no_shuffle;
  }
};

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

void add_data_keys(KeyValues& kv, const DataGenConfig& cfg) {
  kv.emplace_back("data.n", std::to_string(cfg.n));
  kv.emplace_back("data.base_dim", std::to_string(cfg.base_dim));
  kv.emplace_back("data.classes", std::to_string(cfg.classes));
  kv.emplace_back("data.informative_fraction",
                  format_double(cfg.informative_fraction));
  kv.emplace_back("data.noise_dim", std::to_string(cfg.noise_dim));
  kv.emplace_back("data.segments", std::to_string(cfg.segments));
  kv.emplace_back("data.segment_width", std::to_string(cfg.segment_width));
  kv.emplace_back("data.train_fraction", format_double(cfg.train_fraction));
  kv.emplace_back("data.seed", std::to_string(cfg.seed));
  const ViewRecipe* recipes[2] = {&cfg.recipe1, &cfg.recipe2};
  for (int v = 0; v < 2; ++v) {
    const std::string p = "data.view" + std::to_string(v + 1) + ".";
    kv.emplace_back(p + "nonlinearity", nonlinearity_name(recipes[v]->nonlinearity));
    kv.emplace_back(p + "noise_mean", format_double(recipes[v]->noise_mean));
    kv.emplace_back(p + "noise_std", format_double(recipes[v]->noise_std));
    kv.emplace_back(p + "shuffle", recipes[v]->shuffle ? "true" : "false");
  }
}

void add_model_keys(KeyValues& kv, const ModelConfig& cfg) {
  kv.emplace_back("model.code_dim", std::to_string(cfg.code_dim));
  kv.emplace_back("model.attention_dim", std::to_string(cfg.attention_dim));
  kv.emplace_back("model.embed_hidden", std::to_string(cfg.embed_hidden));
  kv.emplace_back("model.encoder_hidden", std::to_string(cfg.encoder_hidden));
  kv.emplace_back("model.decoder_hidden", std::to_string(cfg.decoder_hidden));
  kv.emplace_back("model.disc_hidden", std::to_string(cfg.disc_hidden));
  kv.emplace_back("model.classifier_hidden", std::to_string(cfg.classifier_hidden));
  kv.emplace_back("model.per_view_heads", cfg.per_view_heads ? "true" : "false");
}

void add_training_keys(KeyValues& kv, const TrainingConfig& cfg) {
  kv.emplace_back("training.iterations", std::to_string(cfg.iterations));
  kv.emplace_back("training.t1", std::to_string(cfg.t1));
  kv.emplace_back("training.t2", std::to_string(cfg.t2));
  kv.emplace_back("training.t3", std::to_string(cfg.t3));
  kv.emplace_back("training.alpha", format_double(cfg.alpha));
  kv.emplace_back("training.beta", format_double(cfg.beta));
  kv.emplace_back("training.lr0", format_double(cfg.lr0));
  kv.emplace_back("training.decay", format_double(cfg.decay));
  kv.emplace_back("training.momentum", format_double(cfg.momentum));
  kv.emplace_back("training.batch_size", std::to_string(cfg.batch_size));
  kv.emplace_back("training.seed", std::to_string(cfg.seed));
  kv.emplace_back("training.eval_every", std::to_string(cfg.eval_every));
  kv.emplace_back("training.non_saturating", cfg.non_saturating ? "true" : "false");
  kv.emplace_back("training.stop_grad_residual",
                  cfg.stop_grad_residual ? "true" : "false");
  kv.emplace_back("training.squared_error_classifier",
                  cfg.squared_error_classifier ? "true" : "false");
  kv.emplace_back("training.semi_supervised",
                  cfg.semi_supervised ? "true" : "false");
  kv.emplace_back("training.labeled_fraction", format_double(cfg.labeled_fraction));
  kv.emplace_back("training.fusion", fusion_name(cfg.fusion));
  kv.emplace_back("training.recon", recon_name(cfg.recon));
}

void add_suite_keys(KeyValues& kv, const SuiteConfig& cfg) {
  kv.emplace_back("suite.checkpoint_every", std::to_string(cfg.checkpoint_every));
  kv.emplace_back("suite.posthoc_steps", std::to_string(cfg.posthoc_steps));
  kv.emplace_back("suite.posthoc_hidden", std::to_string(cfg.posthoc_hidden));
  kv.emplace_back("suite.posthoc_lr", format_double(cfg.posthoc_lr));
}

void write_manifest(const fs::path& dir, const std::string& command, KeyValues kv) {
  KeyValues full;
  full.emplace_back("format", "mvsl-run-1");
  full.emplace_back("command", command);
  for (auto& item : kv) full.push_back(std::move(item));
  save_key_values(full, dir / "run_manifest");
}

// ---------------------------------------------------------------------------
// Shared command plumbing
// ---------------------------------------------------------------------------

struct CommonArgs {
  std::string config_file;
  std::string out_dir;
  std::string data_dir;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool with_data) {
  cmd->add_option("--config", args.config_file,
                  "JSON config file; explicit flags override its values");
  cmd->add_option("--out", args.out_dir,
                  "output directory (default $MVSL_OUTPUT_ROOT/<command>)");
  if (with_data)
    cmd->add_option("--data", args.data_dir, "dataset directory from gen-data");
}

fs::path resolve_out(const CommonArgs& args, const std::string& command) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* root = std::getenv("MVSL_OUTPUT_ROOT"))
    return fs::path(root) / command;
  return fs::path("mvsl-out") / command;
}

MultiViewDataset load_input_dataset(const CommonArgs& args,
                                    const std::string& command) {
  if (args.data_dir.empty())
    throw ConfigError(command + ": --data is required");
  if (!fs::exists(fs::path(args.data_dir) / "manifest"))
    throw IoError(args.data_dir + ": no dataset manifest found");
  return load_dataset(args.data_dir);
}

// ---------------------------------------------------------------------------
// Subcommand execution
// ---------------------------------------------------------------------------

int run_gen_data(const CLI::App* cmd, const CommonArgs& args,
                 const DataFlags& flags) {
  const json file_cfg = load_config_file(args.config_file);
  DataGenConfig cfg;
  apply_data_json(config_section(file_cfg, "data"), cfg);
  flags.sync(cmd, cfg);
  cfg.validate();

  const fs::path out = resolve_out(args, "gen-data");
  fs::create_directories(out);
  const MultiViewDataset ds = generate_dataset(cfg);
  save_dataset(ds, out);

  KeyValues kv;
  add_data_keys(kv, cfg);
  kv.emplace_back("output.dataset", out.string());
  write_manifest(out, "gen-data", std::move(kv));
  std::cout << "wrote dataset (" << ds.n() << " samples, "
            << ds.views.size() << " views) to " << out.string() << "\n";
  return 0;
}

int run_train(const CLI::App* cmd, const CommonArgs& args,
              const ModelFlags& mflags, const TrainingFlags& tflags) {
  const json file_cfg = load_config_file(args.config_file);
  const MultiViewDataset ds = load_input_dataset(args, "train");

  ModelConfig mc = default_model_config(ds);
  apply_model_json(config_section(file_cfg, "model"), mc);
  mflags.sync(cmd, mc);

  TrainingConfig tc;
  tc.iterations = 500;
  apply_training_json(config_section(file_cfg, "training"), tc);
  tflags.sync(cmd, tc);

  mc.validate();
  tc.validate();

  const fs::path out = resolve_out(args, "train");
  fs::create_directories(out);
  const TrainResult res = train(mc, tc, ds);

  KeyValues kv;
  kv.emplace_back("input.dataset", args.data_dir);
  add_model_keys(kv, mc);
  add_training_keys(kv, tc);
  kv.emplace_back("output.model", (out / "model.txt").string());
  kv.emplace_back("output.history", (out / "history.csv").string());
  write_manifest(out, "train", std::move(kv));

  res.history.save_csv(out / "history.csv");
  res.model->save(out / "model.txt");
  if (res.status == TrainStatus::Diverged) {
    std::cerr << "error: training diverged: " << res.divergence_note << "\n";
    return 2;
  }
  std::cout << "wrote " << (out / "model.txt").string() << " and "
            << (out / "history.csv").string() << "\n";
  return 0;
}

int run_evaluate(const CommonArgs& args, const std::string& model_file,
                 const std::string& split_name, const std::string& fusion_str,
                 bool semi_supervised) {
  const MultiViewDataset ds = load_input_dataset(args, "evaluate");
  const Split split = parse_split(split_name);
  const FusionMode fusion = parse_fusion(fusion_str);
  if (model_file.empty()) throw ConfigError("evaluate: --model is required");
  const auto model = MultiViewModel::load(model_file);

  const fs::path out = resolve_out(args, "evaluate");
  fs::create_directories(out);
  const MetricReport rep =
      evaluate_model(*model, ds, split, fusion, semi_supervised);
  save_metric_report(rep, out / "metrics.txt");
  save_matrix_csv(rep.confusion, out / "confusion.csv", "pred");

  KeyValues kv;
  kv.emplace_back("input.dataset", args.data_dir);
  kv.emplace_back("input.model", model_file);
  kv.emplace_back("evaluate.split", split_name);
  kv.emplace_back("evaluate.fusion", fusion_str);
  kv.emplace_back("evaluate.semi_supervised", semi_supervised ? "true" : "false");
  kv.emplace_back("output.metrics", (out / "metrics.txt").string());
  kv.emplace_back("output.confusion", (out / "confusion.csv").string());
  write_manifest(out, "evaluate", std::move(kv));
  std::cout << "accuracy " << format_double(rep.accuracy) << ", macro F1 "
            << format_double(rep.macro_f1) << "; wrote "
            << (out / "metrics.txt").string() << "\n";
  return 0;
}

int run_explain(const CommonArgs& args, const std::string& model_file,
                const std::string& split_name) {
  const MultiViewDataset ds = load_input_dataset(args, "explain");
  const Split split = parse_split(split_name);
  if (model_file.empty()) throw ConfigError("explain: --model is required");
  const auto model = MultiViewModel::load(model_file);

  const fs::path out = resolve_out(args, "explain");
  fs::create_directories(out);
  export_attention(*model, ds, split, out / "attention.csv");

  KeyValues kv;
  kv.emplace_back("input.dataset", args.data_dir);
  kv.emplace_back("input.model", model_file);
  kv.emplace_back("explain.split", split_name);
  kv.emplace_back("output.attention", (out / "attention.csv").string());
  write_manifest(out, "explain", std::move(kv));
  std::cout << "wrote " << (out / "attention.csv").string() << "\n";
  return 0;
}

int run_curve_suite(const CLI::App* cmd, const CommonArgs& args,
                    const ModelFlags& mflags, const TrainingFlags& tflags,
                    const SuiteFlags& sflags, const std::string& command,
                    const std::string& flag_parameter,
                    const std::vector<double>& flag_values) {
  const json file_cfg = load_config_file(args.config_file);
  const MultiViewDataset ds = load_input_dataset(args, command);

  SuiteConfig sc;
  sc.training.iterations = 500;
  sc.model = default_model_config(ds);
  apply_model_json(config_section(file_cfg, "model"), sc.model);
  apply_training_json(config_section(file_cfg, "training"), sc.training);
  apply_suite_json(config_section(file_cfg, "suite"), sc);
  mflags.sync(cmd, sc.model);
  tflags.sync(cmd, sc.training);
  sflags.sync(cmd, sc);

  std::string parameter;
  std::vector<double> values;
  if (command == "sweep") {
    apply_sweep_json(config_section(file_cfg, "sweep"), parameter, values);
    if (cmd->count("--parameter")) parameter = flag_parameter;
    if (cmd->count("--values")) values = flag_values;
    if (parameter.empty()) throw ConfigError("sweep: --parameter is required");
    if (values.empty()) throw ConfigError("sweep: --values is required");
  }
  sc.validate();

  const fs::path out = resolve_out(args, command);
  fs::create_directories(out);

  CurveSet curves;
  if (command == "ablate") curves = run_ablation(sc, ds);
  else if (command == "regularizers") curves = run_regularizer_suite(sc, ds);
  else curves = run_sweep(parameter, values, sc, ds);
  curves.save_csv(out / "curves.csv");

  KeyValues kv;
  kv.emplace_back("input.dataset", args.data_dir);
  add_model_keys(kv, sc.model);
  add_training_keys(kv, sc.training);
  add_suite_keys(kv, sc);
  if (command == "sweep") {
    kv.emplace_back("sweep.parameter", parameter);
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) joined += ',';
      joined += format_double(values[i]);
    }
    kv.emplace_back("sweep.values", joined);
  }
  kv.emplace_back("output.curves", (out / "curves.csv").string());
  write_manifest(out, command, std::move(kv));
  std::cout << "wrote " << (out / "curves.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view subspace learning experiments"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  DataFlags gen_flags;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "generate a synthetic two-view dataset");
  add_common_flags(gen_cmd, gen_args, /*with_data=*/false);
  gen_flags.bind(gen_cmd);

  CommonArgs train_args;
  ModelFlags train_mflags;
  TrainingFlags train_tflags;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  add_common_flags(train_cmd, train_args, /*with_data=*/true);
  train_mflags.bind(train_cmd);
  train_tflags.bind(train_cmd);

  CommonArgs eval_args;
  std::string eval_model, eval_split = "test";
  std::string eval_fusion = "shared_plus_residual";
  bool eval_semi = false;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_common_flags(eval_cmd, eval_args, /*with_data=*/true);
  eval_cmd->add_option("--model", eval_model, "checkpoint file from train");
  eval_cmd->add_option("--split", eval_split, "train, test or all");
  eval_cmd->add_option("--fusion", eval_fusion,
                       "shared_plus_residual or shared_copied");
  eval_cmd->add_flag("--semi-supervised", eval_semi,
                     "average the per-view heads instead of the fused classifier");

  CommonArgs explain_args;
  std::string explain_model, explain_split = "test";
  CLI::App* explain_cmd =
      app.add_subcommand("explain", "export per-segment attention weights");
  add_common_flags(explain_cmd, explain_args, /*with_data=*/true);
  explain_cmd->add_option("--model", explain_model, "checkpoint file from train");
  explain_cmd->add_option("--split", explain_split, "train, test or all");

  CommonArgs ablate_args;
  ModelFlags ablate_mflags;
  TrainingFlags ablate_tflags;
  SuiteFlags ablate_sflags;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "compare residual fusion against tiled shared codes");
  add_common_flags(ablate_cmd, ablate_args, /*with_data=*/true);
  ablate_mflags.bind(ablate_cmd);
  ablate_tflags.bind(ablate_cmd);
  ablate_sflags.bind(ablate_cmd);

  CommonArgs reg_args;
  ModelFlags reg_mflags;
  TrainingFlags reg_tflags;
  SuiteFlags reg_sflags;
  CLI::App* reg_cmd = app.add_subcommand(
      "regularizers",
      "compare reconstruction regularizers from shared initialization");
  add_common_flags(reg_cmd, reg_args, /*with_data=*/true);
  reg_mflags.bind(reg_cmd);
  reg_tflags.bind(reg_cmd);
  reg_sflags.bind(reg_cmd);

  CommonArgs sweep_args;
  ModelFlags sweep_mflags;
  TrainingFlags sweep_tflags;
  SuiteFlags sweep_sflags;
  std::string sweep_parameter;
  std::vector<double> sweep_values;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "final held-out error as a function of one knob");
  add_common_flags(sweep_cmd, sweep_args, /*with_data=*/true);
  sweep_mflags.bind(sweep_cmd);
  sweep_tflags.bind(sweep_cmd);
  sweep_sflags.bind(sweep_cmd);
  sweep_cmd->add_option("--parameter", sweep_parameter, "t1, t2, t3, h, alpha or beta");
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen_cmd, gen_args, gen_flags);
    if (train_cmd->parsed())
      return run_train(train_cmd, train_args, train_mflags, train_tflags);
    if (eval_cmd->parsed())
      return run_evaluate(eval_args, eval_model, eval_split, eval_fusion, eval_semi);
    if (explain_cmd->parsed())
      return run_explain(explain_args, explain_model, explain_split);
    if (ablate_cmd->parsed())
      return run_curve_suite(ablate_cmd, ablate_args, ablate_mflags,
                             ablate_tflags, ablate_sflags, "ablate", "", {});
    if (reg_cmd->parsed())
      return run_curve_suite(reg_cmd, reg_args, reg_mflags, reg_tflags,
                             reg_sflags, "regularizers", "", {});
    if (sweep_cmd->parsed())
      return run_curve_suite(sweep_cmd, sweep_args, sweep_mflags, sweep_tflags,
                             sweep_sflags, "sweep", sweep_parameter, sweep_values);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
