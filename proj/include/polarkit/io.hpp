// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_IO_HPP
#define POLARKIT_IO_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polarkit/mosaic.hpp"

// On-disk formats. Every writer goes through write_atomic.
namespace polarkit::io {

namespace fs = std::filesystem;

/// Writes to a sibling temp file and renames it over `path`.
void write_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);
nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& doc);

/// One compact JSON document per line. Blank lines are skipped on read.
std::vector<nlohmann::json> read_jsonl(const fs::path& path);
void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& records);

/// Raw mosaic: 16-bit little-endian unsigned samples, row-major, plus a JSON
/// sidecar at `<path>.json` holding dims, layout and a transfer-function note.
struct RawMosaicFile {
  RawMosaicFrame frame;
  std::string transfer = "linear";
};
RawMosaicFile read_raw_mosaic(const fs::path& path);
/// Samples must be integers in [0, 65535].
void write_raw_mosaic(const fs::path& path, const RawMosaicFrame& frame, std::string_view transfer = "linear");

/// Float map: "PKFMAP" magic, u16 version, u32 height, u32 width, u32 channel
/// count, u32 header length, a JSON header (channel names, metadata), then one
/// 32-bit little-endian plane per channel in row-major order.
struct FloatMap {
  std::vector<std::string> names;
  std::vector<PlaneD> planes;
  nlohmann::json meta = nlohmann::json::object();

  const PlaneD& channel(std::string_view name) const;
};
inline constexpr std::uint16_t kFloatMapVersion = 1;
FloatMap read_float_map(const fs::path& path);
void write_float_map(const fs::path& path, const FloatMap& map);

}  // namespace polarkit::io

#endif  // POLARKIT_IO_HPP
