// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_STOKES_HPP
#define POLARKIT_STOKES_HPP

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "polarkit/errors.hpp"
#include "polarkit/plane.hpp"

namespace polarkit {

/// Four co-registered intensities behind polarizers at 0, 45, 90 and 135 degrees.
/// Intensities are assumed linear in radiance; gamma-encoded input must be
/// linearized by the caller.
template <typename Scalar = double>
struct AngularIntensityStack {
  Plane<Scalar> i0, i45, i90, i135;

  Eigen::Index width() const { return i0.cols(); }
  Eigen::Index height() const { return i0.rows(); }

  /// Throws structural on shape mismatch and data on a negative or non-finite sample.
  void validate() const {
    require(same_shape(i0, i45) && same_shape(i0, i90) && same_shape(i0, i135),
            ErrorKind::structural, "intensity planes differ in dimensions");
    const Plane<Scalar>* planes[] = {&i0, &i45, &i90, &i135};
    const char* names[] = {"i0", "i45", "i90", "i135"};
    for (int p = 0; p < 4; ++p) {
      const auto& plane = *planes[p];
      if ((plane.isFinite() && plane >= Scalar(0)).all()) continue;
      for (Eigen::Index r = 0; r < plane.rows(); ++r) {
        for (Eigen::Index c = 0; c < plane.cols(); ++c) {
          const Scalar v = plane(r, c);
          if (!std::isfinite(v) || v < Scalar(0)) {
            std::ostringstream msg;
            msg << names[p] << " sample at (row=" << r << ", col=" << c << ") is "
                << (std::isfinite(v) ? "negative" : "non-finite") << " (" << v << ")";
            fail(ErrorKind::data, msg.str());
          }
        }
      }
    }
  }
};

template <typename Scalar = double>
struct StokesMap {
  Plane<Scalar> s0, s1, s2;

  Eigen::Index width() const { return s0.cols(); }
  Eigen::Index height() const { return s0.rows(); }

  void validate_shape() const {
    require(same_shape(s0, s1) && same_shape(s0, s2), ErrorKind::structural,
            "Stokes planes differ in dimensions");
  }

  /// Pixels where sqrt(s1^2 + s2^2) exceeds s0 * (1 + slack), or s0 < 0.
  Eigen::Index count_unphysical(Scalar slack) const {
    const auto linear = (s1.square() + s2.square()).sqrt();
    return ((linear > s0 * (Scalar(1) + slack)) || (s0 < Scalar(0))).count();
  }
};

/// Counters produced while deriving DoLP/AoLP. Degenerate pixels are those
/// darker than the darkness threshold; clamped pixels had raw DoLP > 1.
template <typename Scalar = double>
struct PolarimetricDiagnostics {
  Scalar dark_threshold = 0;
  Eigen::Index degenerate_pixels = 0;
  Eigen::Index clamped_pixels = 0;
  Eigen::Index excess_pixels = 0;  // raw DoLP beyond 1 + phys_slack
  Scalar max_raw_dolp = 0;
};

template <typename Scalar = double>
struct PolarimetricMap {
  Plane<Scalar> dolp;  // [0, 1]
  Plane<Scalar> aolp;  // [0, pi)
  PolarimetricDiagnostics<Scalar> diagnostics;

  Eigen::Index width() const { return dolp.cols(); }
  Eigen::Index height() const { return dolp.rows(); }
};

template <typename Scalar = double>
struct PolarimetricOptions {
  /// Darkness threshold as a fraction of the frame's maximum s0.
  Scalar dark_fraction = Scalar(1e-6);
  /// Allowed excess of raw DoLP over 1 before a pixel is reported as unphysical.
  Scalar phys_slack = Scalar(0.05);
};

template <typename Scalar>
StokesMap<Scalar> decode_stokes(const AngularIntensityStack<Scalar>& stack) {
  stack.validate();
  return {stack.i0 + stack.i90, stack.i0 - stack.i90, stack.i45 - stack.i135};
}

/// Malus's law: I(alpha) = s0/2 + s1/2 cos(2 alpha) + s2/2 sin(2 alpha).
template <typename Scalar>
Plane<Scalar> synthesize_intensity(const StokesMap<Scalar>& stokes, Scalar alpha,
                                   bool clamp_non_negative = false) {
  stokes.validate_shape();
  require(std::isfinite(alpha), ErrorKind::data, "polarizer angle is not finite");
  Scalar c = std::cos(Scalar(2) * alpha);
  Scalar s = std::sin(Scalar(2) * alpha);
  // Analyzer angles on the 45-degree grid get exact trig values.
  const Scalar quarter_turns = Scalar(2) * alpha / (std::numbers::pi_v<Scalar> / 2);
  const Scalar nearest = std::round(quarter_turns);
  if (std::abs(quarter_turns - nearest) < Scalar(1e-12)) {
    constexpr Scalar cos_table[] = {1, 0, -1, 0};
    constexpr Scalar sin_table[] = {0, 1, 0, -1};
    const long long k = ((static_cast<long long>(nearest) % 4) + 4) % 4;
    c = cos_table[k];
    s = sin_table[k];
  }
  Plane<Scalar> out = Scalar(0.5) * stokes.s0 + Scalar(0.5) * c * stokes.s1 +
                      Scalar(0.5) * s * stokes.s2;
  if (clamp_non_negative) out = out.max(Scalar(0));
  return out;
}

/// Intensities at the four canonical analyzer angles.
template <typename Scalar>
AngularIntensityStack<Scalar> synthesize_stack(const StokesMap<Scalar>& stokes,
                                               bool clamp_non_negative = false) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  return {synthesize_intensity(stokes, Scalar(0), clamp_non_negative),
          synthesize_intensity(stokes, pi / 4, clamp_non_negative),
          synthesize_intensity(stokes, pi / 2, clamp_non_negative),
          synthesize_intensity(stokes, 3 * pi / 4, clamp_non_negative)};
}

/// AoLP in [0, pi) from the two-argument arctangent.
template <typename Scalar>
Scalar wrapped_aolp(Scalar s1, Scalar s2) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar phi = Scalar(0.5) * std::atan2(s2, s1);
  if (phi < 0) phi += pi;
  if (phi >= pi) phi -= pi;  // atan2 rounding can land exactly on pi after the shift
  return phi;
}

template <typename Scalar>
PolarimetricMap<Scalar> compute_polarimetric(const StokesMap<Scalar>& stokes,
                                             const PolarimetricOptions<Scalar>& options = {}) {
  stokes.validate_shape();
  PolarimetricMap<Scalar> out;
  out.dolp.resize(stokes.height(), stokes.width());
  out.aolp.resize(stokes.height(), stokes.width());

  auto& diag = out.diagnostics;
  const Scalar max_s0 = stokes.s0.size() > 0 ? stokes.s0.maxCoeff() : Scalar(0);
  diag.dark_threshold = options.dark_fraction * max_s0;

  for (Eigen::Index r = 0; r < stokes.height(); ++r) {
    for (Eigen::Index c = 0; c < stokes.width(); ++c) {
      const Scalar s0 = stokes.s0(r, c);
      const Scalar s1 = stokes.s1(r, c);
      const Scalar s2 = stokes.s2(r, c);
      if (!(s0 >= diag.dark_threshold) || s0 <= Scalar(0)) {
        out.dolp(r, c) = 0;
        out.aolp(r, c) = 0;
        ++diag.degenerate_pixels;
        continue;
      }
      const Scalar raw = std::hypot(s1, s2) / s0;
      diag.max_raw_dolp = std::max(diag.max_raw_dolp, raw);
      if (raw > Scalar(1)) ++diag.clamped_pixels;
      if (raw > Scalar(1) + options.phys_slack) ++diag.excess_pixels;
      out.dolp(r, c) = std::min(raw, Scalar(1));
      out.aolp(r, c) = wrapped_aolp(s1, s2);
    }
  }
  return out;
}

template <typename Scalar = double>
struct ResidualReport {
  Plane<Scalar> residual;
  Scalar mean = 0;
  Scalar max = 0;
  Scalar threshold = 0;
  Scalar fraction_above = 0;
};

/// |(i0 + i90) - (i45 + i135)|: both sums estimate s0 under Malus's law.
template <typename Scalar>
ResidualReport<Scalar> consistency_residual(const AngularIntensityStack<Scalar>& stack,
                                            Scalar threshold = Scalar(0)) {
  stack.validate();
  ResidualReport<Scalar> report;
  report.residual = ((stack.i0 + stack.i90) - (stack.i45 + stack.i135)).abs();
  report.threshold = threshold;
  if (report.residual.size() > 0) {
    report.mean = report.residual.mean();
    report.max = report.residual.maxCoeff();
    report.fraction_above = Scalar((report.residual > threshold).count()) /
                            Scalar(report.residual.size());
  }
  return report;
}

}  // namespace polarkit

#endif  // POLARKIT_STOKES_HPP
