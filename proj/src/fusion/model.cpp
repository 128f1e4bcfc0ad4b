// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/fusion/model.hpp"

#include <cmath>
#include <random>

#include "polarkit/errors.hpp"

namespace polarkit::fusion {

using json = nlohmann::json;

const char* to_string(Stage s) noexcept { return s == Stage::stage1 ? "stage1" : "stage2"; }

Stage parse_stage(std::string_view name) {
  if (name == "stage1") return Stage::stage1;
  if (name == "stage2") return Stage::stage2;
  fail(ErrorKind::usage, "unknown stage '" + std::string(name) + "'");
}

const char* to_string(ParamGroup g) noexcept {
  switch (g) {
    case ParamGroup::rgb_encoder: return "rgb_encoder";
    case ParamGroup::rgb_projector: return "rgb_projector";
    case ParamGroup::polar_patch_embed: return "polar_patch_embed";
    case ParamGroup::polar_blocks: return "polar_blocks";
    case ParamGroup::polar_attn_lora: return "polar_attn_lora";
    case ParamGroup::polar_projector_l1: return "polar_projector_l1";
    case ParamGroup::polar_projector_l2: return "polar_projector_l2";
    case ParamGroup::polar_projector_norm: return "polar_projector_norm";
    case ParamGroup::decoder: return "decoder";
    case ParamGroup::decoder_lora: return "decoder_lora";
  }
  return "unknown";
}

ParamGroup parse_param_group(std::string_view name) {
  for (ParamGroup g : kAllGroups) {
    if (name == to_string(g)) return g;
  }
  fail(ErrorKind::usage, "unknown parameter group '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  require(embed_dim > 0 && num_heads > 0 && embed_dim % num_heads == 0, ErrorKind::usage,
          "embed_dim must be a positive multiple of num_heads");
  require(num_layers >= 1 && encoder_layers >= 0, ErrorKind::usage, "layer counts must be positive");
  require(vocab_size >= 2, ErrorKind::usage, "vocab_size must be at least 2");
  require(visual_tokens >= 1 && patch_size >= 1 && projector_hidden >= 1 && max_text_tokens >= 2,
          ErrorKind::usage, "visual token, patch, projector, and text sizes must be positive");
  require(lora.rank >= 1, ErrorKind::usage, "lora rank must be at least 1");
  require(lora.dropout >= 0.0 && lora.dropout < 1.0, ErrorKind::usage, "lora dropout must lie in [0, 1)");
}

json to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"vocab_size", c.vocab_size},
          {"visual_tokens", c.visual_tokens},
          {"patch_size", c.patch_size},
          {"encoder_layers", c.encoder_layers},
          {"projector_hidden", c.projector_hidden},
          {"max_text_tokens", c.max_text_tokens},
          {"lora", {{"rank", c.lora.rank}, {"alpha", c.lora.alpha}, {"dropout", c.lora.dropout}}},
          {"stage", to_string(c.stage)},
          {"seed", c.seed},
          {"polar_init_from_rgb", c.polar_init_from_rgb},
          {"head_init_std", c.head_init_std}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.visual_tokens = j.value("visual_tokens", c.visual_tokens);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.projector_hidden = j.value("projector_hidden", c.projector_hidden);
    c.max_text_tokens = j.value("max_text_tokens", c.max_text_tokens);
    if (j.contains("lora")) {
      c.lora.rank = j["lora"].value("rank", c.lora.rank);
      c.lora.alpha = j["lora"].value("alpha", c.lora.alpha);
      c.lora.dropout = j["lora"].value("dropout", c.lora.dropout);
    }
    c.stage = parse_stage(j.value("stage", std::string("stage1")));
    c.seed = j.value("seed", c.seed);
    c.polar_init_from_rgb = j.value("polar_init_from_rgb", c.polar_init_from_rgb);
    c.head_init_std = j.value("head_init_std", c.head_init_std);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- construction ----

void DualStreamModel::add(std::string name, ParamGroup group, Mat value) {
  params_.push_back({std::move(name), group, std::move(value)});
}

std::size_t DualStreamModel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  fail(ErrorKind::usage, "no parameter named '" + std::string(name) + "'");
}

std::size_t DualStreamModel::scalar_count(ParamGroup g) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.group == g) n += std::size_t(p.value.size());
  }
  return n;
}

DualStreamModel::DualStreamModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](int rows, int cols, double stddev) {
    Mat m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = stddev * normal(rng);
    return m;
  };
  const int e = config_.embed_dim;
  const int f = 4 * e;
  const int r = config_.lora.rank;
  auto linear = [&](int in, int out) { return gaussian(in, out, 1.0 / std::sqrt(double(in))); };
  auto zeros = [](int rows, int cols) { return Mat(Mat::Zero(rows, cols)); };
  auto ones = [](int cols) { return Mat(Mat::Ones(1, cols)); };

  auto encoder = [&](const std::string& prefix, ParamGroup embed_group, ParamGroup block_group,
                     std::optional<ParamGroup> lora_group) {
    add(prefix + "patch.w", embed_group, linear(config_.patch_features(), e));
    add(prefix + "patch.b", embed_group, zeros(1, e));
    add(prefix + "pos", embed_group, gaussian(config_.visual_tokens, e, 0.1));
    for (int l = 0; l < config_.encoder_layers; ++l) {
      const std::string b = prefix + "block" + std::to_string(l) + ".";
      add(b + "norm1.g", block_group, ones(e));
      for (const char* proj : {"q", "k", "v", "o"}) add(b + "attn.w" + proj, block_group, linear(e, e));
      if (lora_group) {
        for (const char* proj : {"q", "k", "v"}) {
          add(b + "attn." + proj + ".lora_a", *lora_group, linear(e, r));
          add(b + "attn." + proj + ".lora_b", *lora_group, zeros(r, e));
        }
      }
      add(b + "norm2.g", block_group, ones(e));
      add(b + "ffn.w1", block_group, linear(e, f));
      add(b + "ffn.b1", block_group, zeros(1, f));
      add(b + "ffn.w2", block_group, linear(f, e));
      add(b + "ffn.b2", block_group, zeros(1, e));
    }
  };

  encoder("rgb_enc.", ParamGroup::rgb_encoder, ParamGroup::rgb_encoder, std::nullopt);
  add("rgb_proj.l1.w", ParamGroup::rgb_projector, linear(e, config_.projector_hidden));
  add("rgb_proj.l1.b", ParamGroup::rgb_projector, zeros(1, config_.projector_hidden));
  add("rgb_proj.l2.w", ParamGroup::rgb_projector, linear(config_.projector_hidden, e));
  add("rgb_proj.l2.b", ParamGroup::rgb_projector, zeros(1, e));

  const std::size_t rgb_begin = 0;
  encoder("polar_enc.", ParamGroup::polar_patch_embed, ParamGroup::polar_blocks, ParamGroup::polar_attn_lora);
  if (config_.polar_init_from_rgb) {
    for (std::size_t i = rgb_begin; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (p.name.rfind("polar_enc.", 0) != 0 || p.group == ParamGroup::polar_attn_lora) continue;
      p.value = param("rgb_enc." + p.name.substr(10));
    }
  }
  add("polar_proj.l1.w", ParamGroup::polar_projector_l1, linear(e, config_.projector_hidden));
  add("polar_proj.l1.b", ParamGroup::polar_projector_l1, zeros(1, config_.projector_hidden));
  add("polar_proj.l2.w", ParamGroup::polar_projector_l2, linear(config_.projector_hidden, e));
  add("polar_proj.l2.b", ParamGroup::polar_projector_l2, zeros(1, e));
  add("polar_proj.norm.g", ParamGroup::polar_projector_norm, ones(e));

  const int max_seq = 2 * config_.visual_tokens + config_.max_text_tokens;
  add("dec.tok", ParamGroup::decoder, gaussian(config_.vocab_size, e, 1.0));
  add("dec.pos", ParamGroup::decoder, gaussian(max_seq, e, 0.1));
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string b = "dec.layer" + std::to_string(l) + ".";
    add(b + "norm1.g", ParamGroup::decoder, ones(e));
    for (const char* proj : {"q", "k", "v", "o"}) add(b + "attn.w" + proj, ParamGroup::decoder, linear(e, e));
    for (const char* proj : {"q", "k", "v", "o"}) {
      add(b + "attn." + proj + ".lora_a", ParamGroup::decoder_lora, linear(e, r));
      add(b + "attn." + proj + ".lora_b", ParamGroup::decoder_lora, zeros(r, e));
    }
    add(b + "norm2.g", ParamGroup::decoder, ones(e));
    add(b + "ffn.w1", ParamGroup::decoder, linear(e, f));
    add(b + "ffn.b1", ParamGroup::decoder, zeros(1, f));
    add(b + "ffn.w2", ParamGroup::decoder, linear(f, e));
    add(b + "ffn.b2", ParamGroup::decoder, zeros(1, e));
  }
  add("dec.norm.g", ParamGroup::decoder, ones(e));
  add("dec.head", ParamGroup::decoder, gaussian(e, config_.vocab_size, config_.head_init_std));
}

// ---- forward graph ----

namespace {

struct Ctx {
  Tape& tape;
  const DualStreamModel& model;
  std::vector<bool> trainable;  // per parameter
  std::vector<Var> leaves;
  const ForwardOptions& options;
  std::mt19937_64 rng;

  Var p(const std::string& name) {
    const std::size_t i = model.index_of(name);
    if (!leaves[i]) leaves[i] = tape.leaf(model.parameters()[i].value, trainable[i]);
    return leaves[i];
  }
  bool has(const std::string& name) const {
    for (const auto& q : model.parameters()) {
      if (q.name == name) return true;
    }
    return false;
  }
};

Var linear(Ctx& c, Var x, const std::string& w, const std::string& b = {}) {
  Var y = matmul(c.tape, x, c.p(w));
  return b.empty() ? y : add_row(c.tape, y, c.p(b));
}

// x W (+ (alpha/r) drop(x) A B when an adapter pair exists and is enabled).
Var projection(Ctx& c, Var x, const std::string& block, const char* proj) {
  Var y = matmul(c.tape, x, c.p(block + "attn.w" + proj));
  const std::string a = block + "attn." + proj + ".lora_a";
  if (!c.options.use_adapters || !c.has(a)) return y;
  const auto& lora = c.model.config().lora;
  Var xin = c.options.training ? dropout(c.tape, x, lora.dropout, c.rng) : x;
  Var delta = matmul(c.tape, matmul(c.tape, xin, c.p(a)), c.p(block + "attn." + proj + ".lora_b"));
  return add(c.tape, y, scale(c.tape, delta, lora.alpha / double(lora.rank)));
}

Var attention(Ctx& c, Var x, const std::string& block, const BoolMat& visible,
              std::vector<Mat>* trace, Eigen::Index trace_start, Eigen::Index trace_rows) {
  const int heads = c.model.config().num_heads;
  const Eigen::Index dh = x->value.cols() / heads;
  Var q = projection(c, x, block, "q");
  Var k = projection(c, x, block, "k");
  Var v = projection(c, x, block, "v");
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(c.tape, q, h * dh, dh);
    Var kh = slice_cols(c.tape, k, h * dh, dh);
    Var vh = slice_cols(c.tape, v, h * dh, dh);
    Var scores = scale(c.tape, matmul_nt(c.tape, qh, kh), 1.0 / std::sqrt(double(dh)));
    Var probs = masked_softmax(c.tape, scores, visible);
    if (trace) trace->push_back(probs->value.middleRows(trace_start, trace_rows));
    outs.push_back(matmul(c.tape, probs, vh));
  }
  return projection(c, concat_cols(c.tape, outs), block, "o");
}

Var block(Ctx& c, Var x, const std::string& prefix, const BoolMat& visible, std::vector<Mat>* trace = nullptr,
          Eigen::Index trace_start = 0, Eigen::Index trace_rows = 0) {
  Var h = rms_norm(c.tape, x, c.p(prefix + "norm1.g"));
  x = add(c.tape, x, attention(c, h, prefix, visible, trace, trace_start, trace_rows));
  h = rms_norm(c.tape, x, c.p(prefix + "norm2.g"));
  h = linear(c, gelu(c.tape, linear(c, h, prefix + "ffn.w1", prefix + "ffn.b1")), prefix + "ffn.w2",
             prefix + "ffn.b2");
  return add(c.tape, x, h);
}

Var encode(Ctx& c, const Mat& patches, const std::string& prefix) {
  Var x = linear(c, c.tape.leaf(patches), prefix + "patch.w", prefix + "patch.b");
  x = add(c.tape, x, c.p(prefix + "pos"));
  const BoolMat all = BoolMat::Constant(x->value.rows(), x->value.rows(), true);
  for (int l = 0; l < c.model.config().encoder_layers; ++l) {
    x = block(c, x, prefix + "block" + std::to_string(l) + ".", all);
  }
  return x;
}

Eigen::VectorXd row_rms(const Mat& m) {
  return (m.array().square().rowwise().sum() / double(m.cols())).sqrt().matrix();
}

void check_batch(const ModelConfig& cfg, const TrainingBatch& b) {
  require(b.polar.rows() == cfg.visual_tokens && b.polar.cols() == cfg.patch_features(), ErrorKind::structural,
          "polar input must be " + std::to_string(cfg.visual_tokens) + "x" + std::to_string(cfg.patch_features()));
  if (cfg.stage == Stage::stage1) {
    require(!b.rgb, ErrorKind::usage, "stage-1 batches bypass the rgb branch and must not carry rgb input");
  } else {
    require(b.rgb.has_value(), ErrorKind::usage, "stage-2 batches need rgb input");
    require(b.rgb->rows() == cfg.visual_tokens && b.rgb->cols() == cfg.patch_features(), ErrorKind::structural,
            "rgb input has the wrong shape");
  }
  require(!b.instruction.empty(), ErrorKind::usage, "instruction needs at least one token");
  require(!b.targets.empty(), ErrorKind::usage, "target length must be at least 1");
  require(b.loss_mask.empty() || b.loss_mask.size() == b.targets.size(), ErrorKind::structural,
          "loss mask length differs from target length");
  require(int(b.instruction.size() + b.targets.size()) <= cfg.max_text_tokens, ErrorKind::usage,
          "text longer than max_text_tokens");
}

struct Graph {
  Var logits = nullptr;
  ForwardResult meta;
};

Graph build(Ctx& c, const TrainingBatch& batch) {
  const ModelConfig& cfg = c.model.config();
  check_batch(cfg, batch);
  Graph g;
  auto& stats = g.meta.stats;

  Var pol = encode(c, batch.polar, "polar_enc.");
  if (c.options.probe.projector_input_scale != 1.0) pol = scale(c.tape, pol, c.options.probe.projector_input_scale);
  pol = linear(c, gelu(c.tape, linear(c, pol, "polar_proj.l1.w", "polar_proj.l1.b")), "polar_proj.l2.w",
               "polar_proj.l2.b");
  if (c.options.probe.projector_output_scale != 1.0) {
    pol = scale(c.tape, pol, c.options.probe.projector_output_scale);
  }
  stats.polar_pre_norm_rms = row_rms(pol->value);
  pol = rms_norm(c.tape, pol, c.p("polar_proj.norm.g"), &stats.degenerate_polar_tokens);
  stats.polar_post_norm_rms = row_rms(pol->value);

  std::vector<Var> visual;
  if (cfg.stage == Stage::stage2) {
    Var rgb = encode(c, *batch.rgb, "rgb_enc.");
    rgb = linear(c, gelu(c.tape, linear(c, rgb, "rgb_proj.l1.w", "rgb_proj.l1.b")), "rgb_proj.l2.w",
                 "rgb_proj.l2.b");
    stats.rgb_rms = row_rms(rgb->value);
    visual.push_back(rgb);
    g.meta.visual_labels.assign(std::size_t(cfg.visual_tokens), StreamLabel::rgb);
  }
  visual.push_back(pol);
  g.meta.visual_labels.insert(g.meta.visual_labels.end(), std::size_t(cfg.visual_tokens), StreamLabel::polar);
  const Eigen::Index nv = Eigen::Index(g.meta.visual_labels.size());

  std::vector<int> text = batch.instruction;
  text.insert(text.end(), batch.targets.begin(), batch.targets.end());
  const Eigen::Index seq = nv + Eigen::Index(text.size());
  std::vector<int> positions(static_cast<std::size_t>(seq));
  for (Eigen::Index i = 0; i < seq; ++i) positions[std::size_t(i)] = int(i);

  Var x = concat_rows(c.tape, {concat_rows(c.tape, visual), gather_rows(c.tape, c.p("dec.tok"), text)});
  x = add(c.tape, x, gather_rows(c.tape, c.p("dec.pos"), positions));

  // Causal over text, with every position seeing every visual token.
  BoolMat visible(seq, seq);
  for (Eigen::Index i = 0; i < seq; ++i) {
    for (Eigen::Index j = 0; j < seq; ++j) visible(i, j) = j < nv || j <= i;
  }
  g.meta.visual_length = nv;
  g.meta.answer_start = nv + Eigen::Index(batch.instruction.size());
  g.meta.trace.visual_streams = g.meta.visual_labels;
  const Eigen::Index answers = Eigen::Index(batch.targets.size());
  for (int l = 0; l < cfg.num_layers; ++l) {
    auto& layer_trace = g.meta.trace.weights.emplace_back();
    x = block(c, x, "dec.layer" + std::to_string(l) + ".", visible, &layer_trace, g.meta.answer_start, answers);
  }
  x = rms_norm(c.tape, x, c.p("dec.norm.g"));
  g.logits = matmul(c.tape, x, c.p("dec.head"));
  g.meta.logits = g.logits->value;
  return g;
}

std::vector<bool> trainable_flags(const DualStreamModel& model, const std::vector<ParamGroup>& groups) {
  std::vector<bool> flags;
  for (const auto& p : model.parameters()) {
    flags.push_back(std::find(groups.begin(), groups.end(), p.group) != groups.end());
  }
  return flags;
}

}  // namespace

ForwardResult forward(const DualStreamModel& model, const TrainingBatch& batch, const ForwardOptions& options) {
  Tape tape;
  Ctx c{tape, model, trainable_flags(model, {}), std::vector<Var>(model.parameters().size(), nullptr), options,
        std::mt19937_64(options.dropout_seed)};
  return build(c, batch).meta;
}

std::vector<Eigen::Index> loss_rows(const TrainingBatch& batch, Eigen::Index answer_start) {
  std::vector<Eigen::Index> rows;
  for (std::size_t k = 0; k < batch.targets.size(); ++k) {
    if (batch.loss_mask.empty() || batch.loss_mask[k]) rows.push_back(answer_start + Eigen::Index(k) - 1);
  }
  require(!rows.empty(), ErrorKind::usage, "loss mask selects no answer position");
  return rows;
}

namespace {
std::vector<int> selected_targets(const TrainingBatch& batch) {
  std::vector<int> out;
  for (std::size_t k = 0; k < batch.targets.size(); ++k) {
    if (batch.loss_mask.empty() || batch.loss_mask[k]) out.push_back(batch.targets[k]);
  }
  return out;
}
}  // namespace

double loss(const ForwardResult& result, const TrainingBatch& batch, Reduction reduction) {
  Tape tape;
  Var logits = tape.leaf(result.logits);
  return nll(tape, logits, loss_rows(batch, result.answer_start), selected_targets(batch), reduction)->value(0, 0);
}

Gradients compute_gradients(const DualStreamModel& model, const TrainingBatch& batch,
                            const std::vector<ParamGroup>& trainable, const ForwardOptions& options) {
  Tape tape;
  Ctx c{tape, model, trainable_flags(model, trainable), std::vector<Var>(model.parameters().size(), nullptr),
        options, std::mt19937_64(options.dropout_seed)};
  Graph g = build(c, batch);
  Var l = nll(tape, g.logits, loss_rows(batch, g.meta.answer_start), selected_targets(batch));
  Gradients out;
  out.loss = l->value(0, 0);
  out.grads.resize(model.parameters().size());
  if (l->requires_grad) tape.backward(l);
  for (std::size_t i = 0; i < c.leaves.size(); ++i) {
    if (!c.trainable[i]) continue;
    const Mat& v = model.parameters()[i].value;
    out.grads[i] = c.leaves[i] && c.leaves[i]->grad.size() ? c.leaves[i]->grad : Mat(Mat::Zero(v.rows(), v.cols()));
  }
  return out;
}

}  // namespace polarkit::fusion
