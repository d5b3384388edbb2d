#include "mvsl/model.hpp"

#include <numeric>
#include <sstream>
#include <string>
#include <utility>

#include "mvsl/csv.hpp"

namespace mvsl {

Index ModelConfig::fused_width() const {
  Index w = code_dim;
  for (int i = 0; i < views; ++i) w += view_width(i);
  return w;
}

void ModelConfig::validate() const {
  if (views < 2) throw ConfigError("model: need at least two views");
  if (segs.size() != static_cast<std::size_t>(views))
    throw ConfigError("model: need one segmentation per view");
  for (const auto& s : segs)
    if (s.k < 1 || s.d < 1)
      throw ConfigError("model: segment counts and widths must be positive");
  if (classes < 2) throw ConfigError("model: need at least 2 classes");
  if (code_dim < 1 || attention_dim < 1 || encoder_hidden < 1 ||
      decoder_hidden < 1 || disc_hidden < 1 || classifier_hidden < 1 ||
      embed_hidden < 0)
    throw ConfigError("model: all widths must be positive");
}

ModelConfig default_model_config(const MultiViewDataset& ds) {
  ds.validate();
  ModelConfig cfg;
  cfg.views = static_cast<int>(ds.views.size());
  cfg.segs = ds.segs;
  cfg.classes = ds.classes;
  return cfg;
}

BatchData make_batch(const MultiViewDataset& ds, std::span<const Index> rows) {
  ds.validate();
  if (rows.empty()) throw ArgumentError("make_batch: empty row selection");
  const Index B = static_cast<Index>(rows.size());
  const auto v = ds.views.size();

  BatchData batch;
  batch.flat.reserve(v);
  batch.pieces.resize(v);
  for (std::size_t i = 0; i < v; ++i) {
    const auto& seg = ds.segs[i];
    const Index w = seg.d * seg.k;
    Matrix flat(w, B);
    batch.pieces[i].reserve(static_cast<std::size_t>(B));
    for (Index b = 0; b < B; ++b) {
      const Index r = rows[static_cast<std::size_t>(b)];
      if (r < 0 || r >= ds.n())
        throw ArgumentError("make_batch: row " + std::to_string(r) +
                            " outside dataset of " + std::to_string(ds.n()));
      const Vector x = ds.views[i].row(r).transpose();
      SegmentedView sv = segment(x, seg.k, seg.d, static_cast<int>(i) + 1);
      flat.col(b) = Eigen::Map<const Vector>(sv.segments.data(), w);
      batch.pieces[i].push_back(std::move(sv));
    }
    batch.flat.push_back(std::move(flat));
  }

  std::vector<int> labels(static_cast<std::size_t>(B));
  for (Index b = 0; b < B; ++b)
    labels[static_cast<std::size_t>(b)] =
        ds.labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(b)])];
  batch.y_cols = one_hot_rows(labels, ds.classes).transpose();
  batch.labeled.assign(static_cast<std::size_t>(B), true);
  return batch;
}

MultiViewModel::MultiViewModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng root(seed);
  const int v = cfg_.views;

  nets_.reserve(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) {
    const auto& seg = cfg_.segs[static_cast<std::size_t>(i)];
    const std::string base = "v" + std::to_string(i + 1);
    const Index q = cfg_.embed_hidden > 0 ? cfg_.embed_hidden : seg.d;
    ViewNets nets;
    {
      Rng r = root.split(base + ".embed");
      nets.embed = Mlp(base + ".embed", {seg.d, q, seg.d}, Activation::Tanh, r);
    }
    {
      Rng r = root.split(base + ".attn_proj");
      nets.attn_proj =
          ParamNode(base + ".attn_proj", glorot_uniform(cfg_.attention_dim, seg.d, r));
    }
    {
      Rng r = root.split(base + ".attn_score");
      nets.attn_score =
          ParamNode(base + ".attn_score", glorot_uniform(1, cfg_.attention_dim, r));
    }
    {
      Rng r = root.split(base + ".encode");
      nets.encode = Mlp(base + ".encode", {seg.d, cfg_.encoder_hidden, cfg_.code_dim},
                        Activation::Linear, r);
    }
    {
      Rng r = root.split(base + ".decode");
      nets.decode = Mlp(base + ".decode",
                        {cfg_.code_dim, cfg_.decoder_hidden, cfg_.decoder_hidden,
                         seg.d * seg.k},
                        Activation::Linear, r);
    }
    nets_.push_back(std::move(nets));
  }

  pair_weights_.reserve(static_cast<std::size_t>(v) * (v - 1) / 2);
  for (int i = 0; i < v; ++i) {
    for (int k = i + 1; k < v; ++k) {
      const std::string tag =
          "pair." + std::to_string(i + 1) + "." + std::to_string(k + 1);
      Rng r = root.split(tag);
      pair_weights_.emplace_back(
          tag, glorot_uniform(cfg_.segs[static_cast<std::size_t>(i)].d,
                              cfg_.segs[static_cast<std::size_t>(k)].d, r));
    }
  }

  {
    Rng r = root.split("disc");
    disc_ = Discriminator(cfg_.code_dim, cfg_.disc_hidden, r);
  }
  {
    Rng r = root.split("clf");
    classifier_ = Mlp("clf", {cfg_.fused_width(), cfg_.classifier_hidden, cfg_.classes},
                      Activation::Linear, r);
  }
  if (cfg_.per_view_heads) {
    heads_.reserve(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) {
      const std::string tag = "head" + std::to_string(i + 1);
      Rng r = root.split(tag);
      heads_.emplace_back(tag,
                          std::vector<Index>{cfg_.code_dim + cfg_.view_width(i),
                                             cfg_.classifier_hidden, cfg_.classes},
                          Activation::Linear, r);
    }
  }
}

ForwardResult MultiViewModel::forward(Tape& t, const BatchData& batch,
                                      const ForwardPlan& plan) {
  const int v = cfg_.views;
  if (batch.flat.size() != static_cast<std::size_t>(v) ||
      batch.pieces.size() != static_cast<std::size_t>(v))
    throw ShapeError("forward: batch has " + std::to_string(batch.flat.size()) +
                     " views, model expects " + std::to_string(v));
  const Index B = batch.batch_size();
  if (B < 1) throw ArgumentError("forward: empty batch");
  if (plan.non_saturating && v != 2)
    throw ConfigError("forward: the non-saturating surrogate is two-view only");
  if (plan.semi_supervised && v != 2)
    throw ConfigError("forward: the two-head objective is two-view only");
  if (plan.semi_supervised && !cfg_.per_view_heads)
    throw ConfigError("forward: model was built without per-view heads");
  if ((plan.reconstruction && plan.recon != ReconKind::Full) && v != 2)
    throw ConfigError("forward: reduced reconstruction objectives are two-view only");

  ForwardResult out;

  // Mount parameters shared across the per-sample loop once.
  std::vector<Var> proj(static_cast<std::size_t>(v));
  std::vector<Var> score(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) {
    proj[static_cast<std::size_t>(i)] = t.param(nets_[static_cast<std::size_t>(i)].attn_proj);
    score[static_cast<std::size_t>(i)] = t.param(nets_[static_cast<std::size_t>(i)].attn_score);
  }
  std::vector<Var> pair_vars(pair_weights_.size());
  for (std::size_t p = 0; p < pair_weights_.size(); ++p)
    pair_vars[p] = t.param(pair_weights_[p]);

  // Embed all segments of a view across the batch in one pass, then slice
  // per sample for the co-attention graph.
  std::vector<Var> m_all(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) {
    auto& pieces = batch.pieces[static_cast<std::size_t>(i)];
    if (static_cast<Index>(pieces.size()) != B)
      throw ShapeError("forward: view " + std::to_string(i + 1) +
                       " has a mismatched sample count");
    std::vector<Var> cols;
    cols.reserve(pieces.size());
    for (const auto& sv : pieces) cols.push_back(t.constant(sv.segments));
    m_all[static_cast<std::size_t>(i)] =
        nets_[static_cast<std::size_t>(i)].embed.apply(t, concat_cols(cols));
  }

  if (plan.want_attention) {
    out.attention.resize(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i)
      out.attention[static_cast<std::size_t>(i)] =
          Matrix(cfg_.segs[static_cast<std::size_t>(i)].k, B);
  }

  // Per-sample co-attention and attention-weighted pooling.
  std::vector<std::vector<Var>> pooled(static_cast<std::size_t>(v));
  for (auto& p : pooled) p.reserve(static_cast<std::size_t>(B));
  for (Index b = 0; b < B; ++b) {
    std::vector<Var> ms(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) {
      const Index k = cfg_.segs[static_cast<std::size_t>(i)].k;
      std::vector<int> idx(static_cast<std::size_t>(k));
      std::iota(idx.begin(), idx.end(), static_cast<int>(b * k));
      ms[static_cast<std::size_t>(i)] =
          select_cols(m_all[static_cast<std::size_t>(i)], std::move(idx));
    }
    const std::vector<Var> hs = multiview_coattend(t, ms, proj, pair_vars);
    for (int i = 0; i < v; ++i) {
      Var a = attend_weights(t, hs[static_cast<std::size_t>(i)],
                             score[static_cast<std::size_t>(i)]);
      if (plan.want_attention)
        out.attention[static_cast<std::size_t>(i)].col(b) =
            a.value().row(0).transpose();
      pooled[static_cast<std::size_t>(i)].push_back(
          matmul(ms[static_cast<std::size_t>(i)], transpose(a)));
    }
  }

  out.codes.resize(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i)
    out.codes[static_cast<std::size_t>(i)] =
        nets_[static_cast<std::size_t>(i)].encode.apply(
            t, concat_cols(pooled[static_cast<std::size_t>(i)]));

  if (plan.adversarial) out.l0 = centroid_adversarial_loss(t, out.codes, disc_);
  if (plan.non_saturating)
    out.encoder_objective =
        non_saturating_encoder_loss(t, out.codes[0], out.codes[1], disc_);

  // Decoder-side graph: reconstructions, reconstruction objective, residuals.
  const bool fuse_needs_residuals =
      plan.classifier &&
      (plan.fusion == FusionMode::SharedPlusResidual || plan.semi_supervised);
  const bool recon_needs_decoders =
      plan.reconstruction && plan.recon != ReconKind::CodeAlignment;
  std::vector<Var> residuals(static_cast<std::size_t>(v));

  if (v == 2) {
    Var x1, x2, g1, g2;
    CrossRecons r;
    if (recon_needs_decoders || fuse_needs_residuals) {
      x1 = t.constant(batch.flat[0]);
      x2 = t.constant(batch.flat[1]);
      std::tie(g1, g2) = gamma_values(t, gamma_);
      r.r11 = decode(t, out.codes[0], nets_[0].decode);
      r.r12 = decode(t, out.codes[1], nets_[0].decode);
      r.r21 = decode(t, out.codes[0], nets_[1].decode);
      r.r22 = decode(t, out.codes[1], nets_[1].decode);
    }
    if (plan.reconstruction) {
      switch (plan.recon) {
        case ReconKind::Full:
          out.lv = cross_recon_loss(t, x1, x2, r, g1, g2);
          break;
        case ReconKind::SameView:
          out.lv = scale(add(squared_frobenius(sub(x1, r.r11)),
                             squared_frobenius(sub(x2, r.r22))),
                         1.0 / static_cast<double>(B));
          break;
        case ReconKind::CrossView:
          out.lv = scale(add(squared_frobenius(sub(x1, r.r12)),
                             squared_frobenius(sub(x2, r.r21))),
                         1.0 / static_cast<double>(B));
          break;
        case ReconKind::CodeAlignment:
          out.lv = scale(l1_norm(sub(out.codes[0], out.codes[1])),
                         1.0 / static_cast<double>(B));
          break;
      }
    }
    if (fuse_needs_residuals) {
      residuals[0] = residual(t, x1, r.r11, r.r12, g1, g2, plan.stop_grad_residual);
      residuals[1] = residual(t, x2, r.r21, r.r22, g1, g2, plan.stop_grad_residual);
    }
  } else {
    std::vector<Var> xs(static_cast<std::size_t>(v));
    if (recon_needs_decoders || fuse_needs_residuals)
      for (int i = 0; i < v; ++i)
        xs[static_cast<std::size_t>(i)] = t.constant(batch.flat[static_cast<std::size_t>(i)]);
    if (plan.reconstruction) {
      std::vector<Mlp*> decoders(static_cast<std::size_t>(v));
      for (int i = 0; i < v; ++i)
        decoders[static_cast<std::size_t>(i)] = &nets_[static_cast<std::size_t>(i)].decode;
      out.lv = centroid_recon_loss(t, xs, out.codes, decoders);
    }
    if (fuse_needs_residuals)
      // With three or more views the view-specific part is the leftover of
      // the view's own reconstruction.
      for (int i = 0; i < v; ++i) {
        Var blend = decode(t, out.codes[static_cast<std::size_t>(i)],
                           nets_[static_cast<std::size_t>(i)].decode);
        if (plan.stop_grad_residual) blend = stop_gradient(blend);
        residuals[static_cast<std::size_t>(i)] =
            sub(xs[static_cast<std::size_t>(i)], blend);
      }
  }

  if (!plan.classifier) return out;

  if (batch.y_cols.rows() != cfg_.classes || batch.y_cols.cols() != B)
    throw ShapeError("forward: label matrix is " + shape_str(batch.y_cols) +
                     ", expected " + shape_str(cfg_.classes, B));

  if (plan.semi_supervised) {
    out.head_probs.resize(2);
    out.head_inputs.resize(2);
    for (int i = 0; i < 2; ++i) {
      Var head_in = concat_rows(
          {out.codes[static_cast<std::size_t>(i)],
           gather_rows(residuals[static_cast<std::size_t>(i)],
                       row_major_perm(cfg_.segs[static_cast<std::size_t>(i)]))});
      if (plan.freeze_classifier_input) head_in = stop_gradient(head_in);
      out.head_inputs[static_cast<std::size_t>(i)] = head_in;
      out.head_probs[static_cast<std::size_t>(i)] =
          classify_probs(t, head_in, heads_[static_cast<std::size_t>(i)]);
    }
    std::vector<bool> labeled = batch.labeled;
    if (labeled.empty()) labeled.assign(static_cast<std::size_t>(B), true);
    out.lc = semisup_loss(t, out.head_probs[0], out.head_probs[1], batch.y_cols,
                          labeled);
    out.probs = scale(add(out.head_probs[0], out.head_probs[1]), 0.5);
    return out;
  }

  Var fused;
  if (plan.fusion == FusionMode::SharedPlusResidual) {
    fused = centroid_fuse(t, out.codes, residuals, cfg_.segs);
  } else {
    Var zs = out.codes[0];
    for (int i = 1; i < v; ++i) zs = add(zs, out.codes[static_cast<std::size_t>(i)]);
    zs = scale(zs, 1.0 / static_cast<double>(v));
    std::vector<int> tile(static_cast<std::size_t>(cfg_.fused_width()));
    for (std::size_t r = 0; r < tile.size(); ++r)
      tile[r] = static_cast<int>(static_cast<Index>(r) % cfg_.code_dim);
    fused = gather_rows(zs, std::move(tile));
  }
  if (plan.freeze_classifier_input) fused = stop_gradient(fused);
  out.fused = fused;
  out.probs = classify_probs(t, fused, classifier_);
  out.lc = plan.squared_error ? squared_error_loss(t, out.probs, batch.y_cols)
                              : cross_entropy_loss(t, out.probs, batch.y_cols);
  return out;
}

std::vector<ParamNode*> MultiViewModel::discriminator_params() {
  return disc_.params();
}

std::vector<ParamNode*> MultiViewModel::autoencoder_params() {
  std::vector<ParamNode*> out;
  for (auto& nets : nets_) {
    for (ParamNode* p : nets.embed.params()) out.push_back(p);
    out.push_back(&nets.attn_proj);
    out.push_back(&nets.attn_score);
    for (ParamNode* p : nets.encode.params()) out.push_back(p);
    for (ParamNode* p : nets.decode.params()) out.push_back(p);
  }
  for (auto& p : pair_weights_) out.push_back(&p);
  out.push_back(&gamma_.logit);
  return out;
}

std::vector<ParamNode*> MultiViewModel::classifier_params() {
  std::vector<ParamNode*> out = classifier_.params();
  for (auto& head : heads_)
    for (ParamNode* p : head.params()) out.push_back(p);
  return out;
}

std::vector<ParamNode*> MultiViewModel::all_params() {
  std::vector<ParamNode*> out = discriminator_params();
  for (ParamNode* p : autoencoder_params()) out.push_back(p);
  for (ParamNode* p : classifier_params()) out.push_back(p);
  return out;
}

void MultiViewModel::save(const std::filesystem::path& file) const {
  auto& self = const_cast<MultiViewModel&>(*this);  // read-only access below
  KeyValues kv;
  auto put = [&kv](const std::string& k, const std::string& v) {
    kv.emplace_back(k, v);
  };
  put("format", "mvsl-model-1");
  put("views", std::to_string(cfg_.views));
  put("classes", std::to_string(cfg_.classes));
  for (int i = 0; i < cfg_.views; ++i) {
    const auto& s = cfg_.segs[static_cast<std::size_t>(i)];
    put("seg" + std::to_string(i + 1), std::to_string(s.k) + " " + std::to_string(s.d));
  }
  put("code_dim", std::to_string(cfg_.code_dim));
  put("attention_dim", std::to_string(cfg_.attention_dim));
  put("embed_hidden", std::to_string(cfg_.embed_hidden));
  put("encoder_hidden", std::to_string(cfg_.encoder_hidden));
  put("decoder_hidden", std::to_string(cfg_.decoder_hidden));
  put("disc_hidden", std::to_string(cfg_.disc_hidden));
  put("classifier_hidden", std::to_string(cfg_.classifier_hidden));
  put("per_view_heads", cfg_.per_view_heads ? "1" : "0");

  for (ParamNode* p : self.all_params()) {
    std::ostringstream line;
    line << p->value.rows() << ' ' << p->value.cols();
    for (Index i = 0; i < p->value.rows(); ++i)
      for (Index j = 0; j < p->value.cols(); ++j)
        line << ' ' << format_double(p->value(i, j));
    put("param." + p->name, line.str());
  }
  save_key_values(kv, file);
}

std::unique_ptr<MultiViewModel> MultiViewModel::load(
    const std::filesystem::path& file) {
  const KeyValues kv = load_key_values(file);
  auto get = [&](const std::string& key) -> const std::string& {
    return kv_get(kv, key, file);
  };
  if (get("format") != "mvsl-model-1")
    throw IoError(file.string() + ": unsupported format '" + get("format") + "'");

  auto to_index = [&](const std::string& key) {
    try {
      return static_cast<Index>(std::stoll(get(key)));
    } catch (const std::exception&) {
      throw IoError(file.string() + ": key '" + key + "' is not an integer");
    }
  };

  ModelConfig cfg;
  cfg.views = static_cast<int>(to_index("views"));
  cfg.classes = static_cast<int>(to_index("classes"));
  for (int i = 0; i < cfg.views; ++i) {
    std::istringstream ss(get("seg" + std::to_string(i + 1)));
    SegmentationSpec s;
    if (!(ss >> s.k >> s.d))
      throw IoError(file.string() + ": bad segmentation for view " +
                    std::to_string(i + 1));
    cfg.segs.push_back(s);
  }
  cfg.code_dim = to_index("code_dim");
  cfg.attention_dim = to_index("attention_dim");
  cfg.embed_hidden = to_index("embed_hidden");
  cfg.encoder_hidden = to_index("encoder_hidden");
  cfg.decoder_hidden = to_index("decoder_hidden");
  cfg.disc_hidden = to_index("disc_hidden");
  cfg.classifier_hidden = to_index("classifier_hidden");
  cfg.per_view_heads = get("per_view_heads") == "1";

  auto model = std::make_unique<MultiViewModel>(cfg, 0);
  for (ParamNode* p : model->all_params()) {
    const std::string key = "param." + p->name;
    std::istringstream ss(get(key));
    Index rows = 0, cols = 0;
    if (!(ss >> rows >> cols) || rows != p->value.rows() || cols != p->value.cols())
      throw IoError(file.string() + ": parameter '" + p->name +
                    "' has shape mismatch with the architecture");
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        if (!(ss >> p->value(i, j)))
          throw IoError(file.string() + ": parameter '" + p->name +
                        "' has too few values");
  }
  return model;
}

namespace {

void check_row_range(const MultiViewDataset& ds, Index row_begin, Index row_end) {
  if (row_begin < 0 || row_end > ds.n() || row_begin >= row_end)
    throw ArgumentError("row range [" + std::to_string(row_begin) + ", " +
                        std::to_string(row_end) + ") is invalid for " +
                        std::to_string(ds.n()) + " samples");
}

// Runs plan-limited forwards over [row_begin, row_end) in chunks.
template <class Fn>
void forward_chunks(MultiViewModel& m, const MultiViewDataset& ds, Index row_begin,
                    Index row_end, const ForwardPlan& plan, Index chunk, Fn&& fn) {
  check_row_range(ds, row_begin, row_end);
  for (Index start = row_begin; start < row_end; start += chunk) {
    const Index stop = std::min(row_end, start + chunk);
    std::vector<Index> rows(static_cast<std::size_t>(stop - start));
    std::iota(rows.begin(), rows.end(), start);
    Tape t;
    const ForwardResult res = m.forward(t, make_batch(ds, rows), plan);
    fn(start - row_begin, res);
  }
}

}  // namespace

Matrix predict_probabilities(MultiViewModel& m, const MultiViewDataset& ds,
                             Index row_begin, Index row_end, FusionMode fusion,
                             bool semi_supervised, Index chunk) {
  check_row_range(ds, row_begin, row_end);
  Matrix probs(row_end - row_begin, m.config().classes);
  ForwardPlan plan;
  plan.adversarial = false;
  plan.reconstruction = false;
  plan.classifier = true;
  plan.fusion = fusion;
  plan.semi_supervised = semi_supervised;
  forward_chunks(m, ds, row_begin, row_end, plan, chunk,
                 [&](Index offset, const ForwardResult& res) {
                   probs.middleRows(offset, res.probs.value().cols()) =
                       res.probs.value().transpose();
                 });
  return probs;
}

Matrix shared_codes(MultiViewModel& m, const MultiViewDataset& ds, Index row_begin,
                    Index row_end, Index chunk) {
  check_row_range(ds, row_begin, row_end);
  Matrix codes(m.config().code_dim, row_end - row_begin);
  ForwardPlan plan;
  plan.adversarial = false;
  plan.reconstruction = false;
  plan.classifier = false;
  forward_chunks(m, ds, row_begin, row_end, plan, chunk,
                 [&](Index offset, const ForwardResult& res) {
                   Matrix zs = res.codes[0].value();
                   for (std::size_t i = 1; i < res.codes.size(); ++i)
                     zs += res.codes[i].value();
                   zs /= static_cast<double>(res.codes.size());
                   codes.middleCols(offset, zs.cols()) = zs;
                 });
  return codes;
}

}  // namespace mvsl
