// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/fusion/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polarkit/errors.hpp"

namespace polarkit::fusion {

using json = nlohmann::json;

StageMask StageMask::for_stage(Stage s) {
  if (s == Stage::stage1) {
    return {s,
            {ParamGroup::polar_patch_embed, ParamGroup::polar_projector_l1, ParamGroup::polar_projector_l2,
             ParamGroup::polar_projector_norm}};
  }
  return {s, {ParamGroup::decoder_lora, ParamGroup::polar_attn_lora, ParamGroup::polar_projector_l1}};
}

bool StageMask::is_trainable(ParamGroup g) const {
  return std::find(trainable.begin(), trainable.end(), g) != trainable.end();
}

OptimizerConfig OptimizerConfig::for_stage(Stage s, int total_steps) {
  OptimizerConfig c;
  c.total_steps = total_steps;
  if (s == Stage::stage1) {
    c.learning_rate = {{ParamGroup::polar_projector_l1, 5e-3},
                       {ParamGroup::polar_projector_l2, 5e-3},
                       {ParamGroup::polar_projector_norm, 5e-3},
                       {ParamGroup::polar_patch_embed, 5e-4}};
  } else {
    c.learning_rate = {{ParamGroup::decoder_lora, 2e-3},
                       {ParamGroup::polar_projector_l1, 1e-3},
                       {ParamGroup::polar_attn_lora, 2e-4}};
  }
  return c;
}

double OptimizerConfig::lr(ParamGroup g, int step) const {
  auto it = learning_rate.find(g);
  const double base = it == learning_rate.end() ? default_lr : it->second;
  if (total_steps <= 0 || warmup_ratio <= 0) return base;
  const int warmup = std::max(1, int(std::ceil(warmup_ratio * total_steps)));
  return step < warmup ? base * double(step + 1) / double(warmup) : base;
}

json to_json(const OptimizerConfig& c) {
  json rates = json::object();
  for (const auto& [g, lr] : c.learning_rate) rates[to_string(g)] = lr;
  return {{"learning_rate", rates},     {"default_lr", c.default_lr},     {"beta1", c.beta1},
          {"beta2", c.beta2},           {"epsilon", c.epsilon},           {"weight_decay", c.weight_decay},
          {"warmup_ratio", c.warmup_ratio}, {"total_steps", c.total_steps}};
}

OptimizerConfig optimizer_config_from_json(const json& j, Stage stage, int total_steps) {
  OptimizerConfig c = OptimizerConfig::for_stage(stage, total_steps);
  try {
    if (j.contains("learning_rate")) {
      for (const auto& [name, lr] : j["learning_rate"].items()) c.learning_rate[parse_param_group(name)] = lr.get<double>();
    }
    c.default_lr = j.value("default_lr", c.default_lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed optimizer config: ") + e.what());
  }
  return c;
}

double train_step(DualStreamModel& model, const TrainingBatch& batch, const StageMask& mask, AdamState& state,
                  const OptimizerConfig& optimizer) {
  require(mask.stage == model.stage(), ErrorKind::usage,
          std::string("stage mask is for ") + to_string(mask.stage) + " but the model is in " +
              to_string(model.stage()));
  auto& params = model.parameters();
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
  }
  ForwardOptions options;
  options.training = true;
  options.dropout_seed = model.config().seed ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(state.step + 1));
  Gradients g = compute_gradients(model, batch, mask.trainable, options);

  const int t = state.step + 1;
  const double c1 = 1.0 - std::pow(optimizer.beta1, t);
  const double c2 = 1.0 - std::pow(optimizer.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (g.grads[i].size() == 0) continue;
    Mat& w = params[i].value;
    if (state.m[i].size() == 0) {
      state.m[i] = Mat::Zero(w.rows(), w.cols());
      state.v[i] = Mat::Zero(w.rows(), w.cols());
    }
    state.m[i] = optimizer.beta1 * state.m[i] + (1.0 - optimizer.beta1) * g.grads[i];
    state.v[i] = optimizer.beta2 * state.v[i] + (1.0 - optimizer.beta2) * g.grads[i].cwiseProduct(g.grads[i]);
    const double lr = optimizer.lr(params[i].group, state.step);
    const Mat update = (state.m[i] / c1).array() / ((state.v[i] / c2).array().sqrt() + optimizer.epsilon);
    w = w * (1.0 - lr * optimizer.weight_decay) - lr * update;
  }
  state.step = t;
  return g.loss;
}

TrainLog train(DualStreamModel& model, const std::vector<TrainingBatch>& batches, const StageMask& mask,
               const OptimizerConfig& optimizer, int steps) {
  require(!batches.empty(), ErrorKind::usage, "training needs at least one batch");
  AdamState state;
  TrainLog log;
  for (int s = 0; s < steps; ++s) {
    log.losses.push_back(train_step(model, batches[std::size_t(s) % batches.size()], mask, state, optimizer));
  }
  return log;
}

GradientCheckReport gradient_check(const DualStreamModel& model, const TrainingBatch& batch, const StageMask& mask,
                                   int per_group, std::uint64_t seed, double step, double floor) {
  const Gradients g = compute_gradients(model, batch, mask.trainable);
  DualStreamModel probe = model;
  std::mt19937_64 rng(seed);
  GradientCheckReport report;
  auto loss_at = [&](std::size_t i, Eigen::Index k, double value) {
    probe.parameters()[i].value.data()[k] = value;
    return loss(forward(probe, batch), batch);
  };
  for (ParamGroup group : mask.trainable) {
    std::vector<std::pair<std::size_t, Eigen::Index>> coords;
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
      if (model.parameters()[i].group != group) continue;
      for (Eigen::Index k = 0; k < model.parameters()[i].value.size(); ++k) coords.emplace_back(i, k);
    }
    for (int n = 0; n < per_group && !coords.empty(); ++n) {
      const auto [i, k] = coords[rng() % coords.size()];
      const double w = model.parameters()[i].value.data()[k];
      const double numeric = (loss_at(i, k, w + step) - loss_at(i, k, w - step)) / (2.0 * step);
      probe.parameters()[i].value.data()[k] = w;
      const double analytic = g.grads[i].data()[k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      report.entries.push_back({group, model.parameters()[i].name, k, analytic, numeric, rel});
      report.max_relative_error = std::max(report.max_relative_error, rel);
    }
  }
  return report;
}

}  // namespace polarkit::fusion
