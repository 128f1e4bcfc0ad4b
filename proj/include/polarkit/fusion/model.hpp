// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_FUSION_MODEL_HPP
#define POLARKIT_FUSION_MODEL_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polarkit/fusion/tape.hpp"

namespace polarkit::fusion {

enum class Stage { stage1, stage2 };
const char* to_string(Stage s) noexcept;
Stage parse_stage(std::string_view name);

/// Every parameter lives in exactly one group; stage masks are defined over groups.
enum class ParamGroup {
  rgb_encoder,
  rgb_projector,
  polar_patch_embed,  // patch projection and position table
  polar_blocks,
  polar_attn_lora,
  polar_projector_l1,
  polar_projector_l2,
  polar_projector_norm,
  decoder,
  decoder_lora,
};
inline constexpr std::array<ParamGroup, 10> kAllGroups = {
    ParamGroup::rgb_encoder,        ParamGroup::rgb_projector,      ParamGroup::polar_patch_embed,
    ParamGroup::polar_blocks,       ParamGroup::polar_attn_lora,    ParamGroup::polar_projector_l1,
    ParamGroup::polar_projector_l2, ParamGroup::polar_projector_norm, ParamGroup::decoder,
    ParamGroup::decoder_lora};
const char* to_string(ParamGroup g) noexcept;
ParamGroup parse_param_group(std::string_view name);

struct LoraConfig {
  int rank = 4;
  double alpha = 8.0;
  double dropout = 0.0;
};

struct ModelConfig {
  int embed_dim = 32;
  int num_layers = 2;
  int num_heads = 2;
  int vocab_size = 64;
  int visual_tokens = 16;  // per stream
  int patch_size = 2;      // patch features = 3 * patch_size^2
  int encoder_layers = 1;
  int projector_hidden = 64;
  int max_text_tokens = 32;
  LoraConfig lora;
  Stage stage = Stage::stage1;
  std::uint64_t seed = 0;
  bool polar_init_from_rgb = true;  // polar encoder starts as a copy of the rgb encoder
  double head_init_std = 0.5;

  int patch_features() const { return 3 * patch_size * patch_size; }
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Parameter {
  std::string name;
  ParamGroup group;
  Mat value;
};

class DualStreamModel {
 public:
  explicit DualStreamModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  Stage stage() const { return config_.stage; }
  /// Moves to stage 2; adapters keep their current (zero-B at init) values.
  void set_stage(Stage s) { config_.stage = s; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t index_of(std::string_view name) const;
  Mat& param(std::string_view name) { return params_[index_of(name)].value; }
  const Mat& param(std::string_view name) const { return params_[index_of(name)].value; }
  std::size_t scalar_count(ParamGroup g) const;

 private:
  void add(std::string name, ParamGroup group, Mat value);

  ModelConfig config_;
  std::vector<Parameter> params_;
};

struct TrainingBatch {
  Mat polar;               // visual_tokens x patch_features
  std::optional<Mat> rgb;  // stage 2 only
  std::vector<int> instruction;
  std::vector<int> targets;     // y_1..y_L
  std::vector<bool> loss_mask;  // over targets; empty selects every target
};

enum class StreamLabel { rgb, polar };

struct AttentionTrace {
  std::vector<StreamLabel> visual_streams;  // one label per leading visual key
  /// weights[layer][head]: rows are answer-token queries, columns all keys.
  std::vector<std::vector<Mat>> weights;
};

struct StreamStats {
  Eigen::VectorXd polar_pre_norm_rms;   // per polar token
  Eigen::VectorXd polar_post_norm_rms;  // per polar token
  Eigen::VectorXd rgb_rms;              // per rgb token (empty in stage 1)
  int degenerate_polar_tokens = 0;      // zero-RMS tokens before normalization
};

/// Test hooks applied around the polar projector.
struct ScaleProbe {
  double projector_input_scale = 1.0;
  double projector_output_scale = 1.0;  // before the normalization layer
};

struct ForwardOptions {
  bool use_adapters = true;
  bool training = false;  // enables adapter dropout
  ScaleProbe probe;
  std::uint64_t dropout_seed = 0;
};

struct ForwardResult {
  Mat logits;  // sequence x vocab
  AttentionTrace trace;
  StreamStats stats;
  std::vector<StreamLabel> visual_labels;
  Eigen::Index visual_length = 0;
  Eigen::Index answer_start = 0;  // sequence index of the first answer token
};

ForwardResult forward(const DualStreamModel& model, const TrainingBatch& batch, const ForwardOptions& options = {});

/// Logits rows that predict each selected target.
std::vector<Eigen::Index> loss_rows(const TrainingBatch& batch, Eigen::Index answer_start);

double loss(const ForwardResult& result, const TrainingBatch& batch, Reduction reduction = Reduction::mean);

/// Loss with gradients for every parameter whose group is in `trainable`
/// (other entries are left empty).
struct Gradients {
  double loss = 0;
  std::vector<Mat> grads;  // parallel to parameters(); size 0 when frozen
};
Gradients compute_gradients(const DualStreamModel& model, const TrainingBatch& batch,
                            const std::vector<ParamGroup>& trainable, const ForwardOptions& options = {});

}  // namespace polarkit::fusion

#endif  // POLARKIT_FUSION_MODEL_HPP
