// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_ENCODING_HPP
#define POLARKIT_ENCODING_HPP

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "polarkit/stokes.hpp"

namespace polarkit {

/// Three-channel polarization encodings. Channel order per variant:
///   decoupled     [P, sin 2phi, cos 2phi]
///   s0_stokes     [S0, S1, S2]
///   dolp_coupled  [P, P cos 2phi, P sin 2phi]   (cos before sin)
///   s0_dolp_aolp  [S0, P, phi]
enum class EncodingVariant { decoupled, s0_stokes, dolp_coupled, s0_dolp_aolp };

inline const char* to_string(EncodingVariant v) noexcept {
  switch (v) {
    case EncodingVariant::decoupled: return "decoupled";
    case EncodingVariant::s0_stokes: return "s0_stokes";
    case EncodingVariant::dolp_coupled: return "dolp_coupled";
    case EncodingVariant::s0_dolp_aolp: return "s0_dolp_aolp";
  }
  return "?";
}

inline EncodingVariant parse_encoding_variant(std::string_view name) {
  for (auto v : {EncodingVariant::decoupled, EncodingVariant::s0_stokes,
                 EncodingVariant::dolp_coupled, EncodingVariant::s0_dolp_aolp}) {
    if (name == to_string(v)) return v;
  }
  fail(ErrorKind::usage, "unknown encoding variant '" + std::string(name) + "'");
}

inline std::array<std::string, 3> channel_names(EncodingVariant v) {
  switch (v) {
    case EncodingVariant::decoupled: return {"dolp", "sin2aolp", "cos2aolp"};
    case EncodingVariant::s0_stokes: return {"s0", "s1", "s2"};
    case EncodingVariant::dolp_coupled: return {"dolp", "dolp_cos2aolp", "dolp_sin2aolp"};
    case EncodingVariant::s0_dolp_aolp: return {"s0", "dolp", "aolp"};
  }
  return {};
}

template <typename Scalar = double>
struct ChannelStats {
  std::array<Scalar, 3> mean{};
  std::array<Scalar, 3> stddev{};
  /// Affine transform applied by channel_normalize: x' = scale * x + shift.
  std::array<Scalar, 3> scale{1, 1, 1};
  std::array<Scalar, 3> shift{0, 0, 0};
};

template <typename Scalar = double>
struct EncodedInput {
  std::array<Plane<Scalar>, 3> channels;
  EncodingVariant variant = EncodingVariant::decoupled;
  ChannelStats<Scalar> channel_stats;

  Eigen::Index width() const { return channels[0].cols(); }
  Eigen::Index height() const { return channels[0].rows(); }
};

/// Population mean and standard deviation of each channel.
template <typename Scalar>
void refresh_channel_stats(EncodedInput<Scalar>& encoded) {
  for (int k = 0; k < 3; ++k) {
    const auto& ch = encoded.channels[k];
    if (ch.size() == 0) {
      encoded.channel_stats.mean[k] = 0;
      encoded.channel_stats.stddev[k] = 0;
      continue;
    }
    const Scalar mean = ch.mean();
    encoded.channel_stats.mean[k] = mean;
    encoded.channel_stats.stddev[k] = std::sqrt((ch - mean).square().mean());
  }
}

template <typename Scalar>
EncodedInput<Scalar> encode(const StokesMap<Scalar>& stokes, const PolarimetricMap<Scalar>& polar,
                            EncodingVariant variant) {
  stokes.validate_shape();
  require(same_shape(stokes.s0, polar.dolp) && same_shape(stokes.s0, polar.aolp),
          ErrorKind::structural, "Stokes and polarimetric maps differ in dimensions");

  EncodedInput<Scalar> out;
  out.variant = variant;
  const auto& P = polar.dolp;
  const Plane<Scalar> two_phi = Scalar(2) * polar.aolp;
  switch (variant) {
    case EncodingVariant::decoupled:
      // Dark pixels carry aolp = 0, so they encode as (sin, cos) = (0, 1).
      out.channels = {P, two_phi.sin(), two_phi.cos()};
      break;
    case EncodingVariant::s0_stokes:
      out.channels = {stokes.s0, stokes.s1, stokes.s2};
      break;
    case EncodingVariant::dolp_coupled:
      out.channels = {P, P * two_phi.cos(), P * two_phi.sin()};
      break;
    case EncodingVariant::s0_dolp_aolp:
      out.channels = {stokes.s0, P, polar.aolp};
      break;
  }
  refresh_channel_stats(out);
  return out;
}

/// Max deviation of the decoupled angular channels from the normalized Stokes
/// components s2/|L| and s1/|L|, over pixels with |L| = sqrt(s1^2 + s2^2) > linear_floor.
template <typename Scalar>
Scalar verify_normalized_stokes_identity(const StokesMap<Scalar>& stokes,
                                         const EncodedInput<Scalar>& encoded,
                                         Scalar linear_floor) {
  require(encoded.variant == EncodingVariant::decoupled, ErrorKind::usage,
          "normalized-Stokes identity applies to the decoupled encoding only");
  require(same_shape(stokes.s0, encoded.channels[1]), ErrorKind::structural,
          "Stokes map and encoding differ in dimensions");
  Scalar worst = 0;
  for (Eigen::Index r = 0; r < stokes.height(); ++r) {
    for (Eigen::Index c = 0; c < stokes.width(); ++c) {
      const Scalar s1 = stokes.s1(r, c), s2 = stokes.s2(r, c);
      const Scalar linear = std::hypot(s1, s2);
      if (!(linear > linear_floor)) continue;
      worst = std::max(worst, std::abs(encoded.channels[1](r, c) - s2 / linear));
      worst = std::max(worst, std::abs(encoded.channels[2](r, c) - s1 / linear));
    }
  }
  return worst;
}

/// Channel triple a single pixel with the given DoLP, AoLP and S0 encodes to.
/// AoLP is used as given, without wrapping, so pi-periodicity can be probed.
template <typename Scalar>
std::array<Scalar, 3> encode_pixel(Scalar dolp, Scalar aolp, EncodingVariant variant,
                                   Scalar s0 = Scalar(1)) {
  const Scalar c2 = std::cos(Scalar(2) * aolp), s2 = std::sin(Scalar(2) * aolp);
  switch (variant) {
    case EncodingVariant::decoupled: return {dolp, s2, c2};
    case EncodingVariant::s0_stokes: return {s0, s0 * dolp * c2, s0 * dolp * s2};
    case EncodingVariant::dolp_coupled: return {dolp, dolp * c2, dolp * s2};
    case EncodingVariant::s0_dolp_aolp: return {s0, dolp, aolp};
  }
  return {};
}

/// Euclidean distance between the channel triples at two AoLP values, fixed DoLP.
template <typename Scalar>
Scalar boundary_continuity_gap(Scalar phi_a, Scalar phi_b, EncodingVariant variant,
                               Scalar dolp = Scalar(1)) {
  const auto a = encode_pixel(dolp, phi_a, variant);
  const auto b = encode_pixel(dolp, phi_b, variant);
  Scalar sum = 0;
  for (int k = 0; k < 3; ++k) sum += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(sum);
}

enum class NormalizeMode { affine, mean_only };

template <typename Scalar = double>
struct TargetStats {
  std::array<Scalar, 3> mean{0, 0, 0};
  std::array<Scalar, 3> stddev{1, 1, 1};
};

/// Affine per-channel rescale onto target mean/std. mean_only shifts without scaling.
template <typename Scalar>
EncodedInput<Scalar> channel_normalize(const EncodedInput<Scalar>& encoded,
                                       const TargetStats<Scalar>& target,
                                       NormalizeMode mode = NormalizeMode::affine) {
  EncodedInput<Scalar> out = encoded;
  refresh_channel_stats(out);
  const auto source = out.channel_stats;
  for (int k = 0; k < 3; ++k) {
    Scalar scale = 1;
    if (mode == NormalizeMode::affine) {
      require(target.stddev[k] > 0, ErrorKind::usage, "target standard deviation must be positive");
      require(source.stddev[k] > 0, ErrorKind::degenerate,
              "channel " + std::to_string(k) + " has zero variance");
      scale = target.stddev[k] / source.stddev[k];
    }
    const Scalar shift = target.mean[k] - scale * source.mean[k];
    out.channels[k] = scale * out.channels[k] + shift;
    out.channel_stats.scale[k] = scale * encoded.channel_stats.scale[k];
    out.channel_stats.shift[k] = scale * encoded.channel_stats.shift[k] + shift;
  }
  const auto scale = out.channel_stats.scale;
  const auto shift = out.channel_stats.shift;
  refresh_channel_stats(out);
  out.channel_stats.scale = scale;
  out.channel_stats.shift = shift;
  return out;
}

}  // namespace polarkit

#endif  // POLARKIT_ENCODING_HPP
