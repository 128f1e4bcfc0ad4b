// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_FUSION_ANALYSIS_HPP
#define POLARKIT_FUSION_ANALYSIS_HPP

#include <vector>

#include <json.hpp>

#include "polarkit/fusion/model.hpp"

namespace polarkit::fusion {

/// Per layer: mass on polar visual keys over mass on all visual keys, averaged
/// over heads and answer queries. Throws degenerate on a query with no visual mass.
std::vector<double> polarization_attention_ratio(const AttentionTrace& trace);

/// Largest |row sum - 1| over every recorded attention row.
double max_row_sum_error(const AttentionTrace& trace);

/// Trace where each answer query attends uniformly to `keys` keys, the first
/// n_rgb + n_polar of which are visual (rgb first).
AttentionTrace uniform_trace(int n_rgb, int n_polar, int layers, int heads, int queries, int text_keys = 0);

struct StreamScaleReport {
  double polar_pre_norm_rms = 0;   // mean over tokens
  double polar_post_norm_rms = 0;  // mean over tokens
  double rgb_rms = 0;              // mean over tokens, 0 without rgb
  double gain_rms = 0;             // rms of the learned gain: the post-normalization target
  int degenerate_tokens = 0;
  StreamStats per_token;

  nlohmann::json to_json() const;
};

StreamScaleReport stream_scale_report(const DualStreamModel& model, const TrainingBatch& batch,
                                      const ScaleProbe& probe = {});

}  // namespace polarkit::fusion

#endif  // POLARKIT_FUSION_ANALYSIS_HPP
