// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/fusion/analysis.hpp"

#include <cmath>

#include "polarkit/errors.hpp"

namespace polarkit::fusion {

std::vector<double> polarization_attention_ratio(const AttentionTrace& trace) {
  const Eigen::Index nv = Eigen::Index(trace.visual_streams.size());
  require(nv > 0, ErrorKind::degenerate, "trace has no visual keys");
  std::vector<double> ratios;
  for (std::size_t l = 0; l < trace.weights.size(); ++l) {
    double sum = 0;
    long count = 0;
    for (const Mat& w : trace.weights[l]) {
      require(w.cols() >= nv, ErrorKind::structural, "trace rows are narrower than the visual prefix");
      for (Eigen::Index q = 0; q < w.rows(); ++q) {
        double polar = 0, visual = 0;
        for (Eigen::Index k = 0; k < nv; ++k) {
          visual += w(q, k);
          if (trace.visual_streams[std::size_t(k)] == StreamLabel::polar) polar += w(q, k);
        }
        require(visual > 0, ErrorKind::degenerate,
                "layer " + std::to_string(l) + " query " + std::to_string(q) + " puts no mass on visual keys");
        sum += polar / visual;
        ++count;
      }
    }
    require(count > 0, ErrorKind::degenerate, "layer " + std::to_string(l) + " has no answer queries");
    ratios.push_back(sum / double(count));
  }
  return ratios;
}

double max_row_sum_error(const AttentionTrace& trace) {
  double worst = 0;
  for (const auto& layer : trace.weights) {
    for (const Mat& w : layer) {
      for (Eigen::Index q = 0; q < w.rows(); ++q) worst = std::max(worst, std::abs(w.row(q).sum() - 1.0));
    }
  }
  return worst;
}

AttentionTrace uniform_trace(int n_rgb, int n_polar, int layers, int heads, int queries, int text_keys) {
  AttentionTrace t;
  t.visual_streams.assign(std::size_t(n_rgb), StreamLabel::rgb);
  t.visual_streams.insert(t.visual_streams.end(), std::size_t(n_polar), StreamLabel::polar);
  const int keys = n_rgb + n_polar + text_keys;
  for (int l = 0; l < layers; ++l) {
    auto& layer = t.weights.emplace_back();
    for (int h = 0; h < heads; ++h) layer.push_back(Mat::Constant(queries, keys, 1.0 / keys));
  }
  return t;
}

nlohmann::json StreamScaleReport::to_json() const {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"polar_pre_norm_rms", polar_pre_norm_rms},
          {"polar_post_norm_rms", polar_post_norm_rms},
          {"rgb_rms", rgb_rms},
          {"gain_rms", gain_rms},
          {"degenerate_tokens", degenerate_tokens},
          {"per_token",
           {{"polar_pre_norm_rms", vec(per_token.polar_pre_norm_rms)},
            {"polar_post_norm_rms", vec(per_token.polar_post_norm_rms)},
            {"rgb_rms", vec(per_token.rgb_rms)}}}};
}

StreamScaleReport stream_scale_report(const DualStreamModel& model, const TrainingBatch& batch,
                                      const ScaleProbe& probe) {
  ForwardOptions options;
  options.probe = probe;
  const ForwardResult r = forward(model, batch, options);
  StreamScaleReport rep;
  rep.per_token = r.stats;
  rep.degenerate_tokens = r.stats.degenerate_polar_tokens;
  rep.polar_pre_norm_rms = r.stats.polar_pre_norm_rms.mean();
  rep.polar_post_norm_rms = r.stats.polar_post_norm_rms.mean();
  rep.rgb_rms = r.stats.rgb_rms.size() ? r.stats.rgb_rms.mean() : 0.0;
  const Mat& g = model.param("polar_proj.norm.g");
  rep.gain_rms = std::sqrt(g.squaredNorm() / double(g.size()));
  return rep;
}

}  // namespace polarkit::fusion
