// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_FUSION_TRAIN_HPP
#define POLARKIT_FUSION_TRAIN_HPP

#include <map>
#include <vector>

#include "polarkit/fusion/model.hpp"

namespace polarkit::fusion {

struct StageMask {
  Stage stage = Stage::stage1;
  std::vector<ParamGroup> trainable;

  static StageMask for_stage(Stage s);
  bool is_trainable(ParamGroup g) const;
};

struct OptimizerConfig {
  std::map<ParamGroup, double> learning_rate;  // groups without an entry use default_lr
  double default_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.05;
  double warmup_ratio = 0.03;
  int total_steps = 0;  // 0 disables warmup scheduling

  /// Stage defaults keep the published relative group rates, scaled up for toy runs.
  static OptimizerConfig for_stage(Stage s, int total_steps);
  double lr(ParamGroup g, int step) const;
};

nlohmann::json to_json(const OptimizerConfig& c);
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j, Stage stage, int total_steps);

struct AdamState {
  int step = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;
};

/// One AdamW update of the trainable groups. Frozen parameters are never written.
double train_step(DualStreamModel& model, const TrainingBatch& batch, const StageMask& mask, AdamState& state,
                  const OptimizerConfig& optimizer);

struct TrainLog {
  std::vector<double> losses;
};

TrainLog train(DualStreamModel& model, const std::vector<TrainingBatch>& batches, const StageMask& mask,
               const OptimizerConfig& optimizer, int steps);

struct GradientCheckEntry {
  ParamGroup group;
  std::string parameter;
  Eigen::Index index = 0;
  double analytic = 0;
  double numeric = 0;
  double relative_error = 0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double max_relative_error = 0;
};

/// Central differences on `per_group` random coordinates of every trainable group.
GradientCheckReport gradient_check(const DualStreamModel& model, const TrainingBatch& batch, const StageMask& mask,
                                   int per_group, std::uint64_t seed, double step = 1e-5, double floor = 1e-7);

}  // namespace polarkit::fusion

#endif  // POLARKIT_FUSION_TRAIN_HPP
