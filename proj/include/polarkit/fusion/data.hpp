// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_FUSION_DATA_HPP
#define POLARKIT_FUSION_DATA_HPP

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "polarkit/fusion/model.hpp"
#include "polarkit/plane.hpp"

namespace polarkit::fusion {

namespace fs = std::filesystem;

/// Fixed word-level vocabulary shipped as data. Ids 0..3 are <pad>, <bos>,
/// <eos>, <unk>.
class Tokenizer {
 public:
  static Tokenizer load(const fs::path& file);
  static Tokenizer from_json(const nlohmann::json& j);

  int size() const { return int(tokens_.size()); }
  int bos() const { return 1; }
  int eos() const { return 2; }
  int unk() const { return 3; }
  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Cuts three equally sized planes into a square grid of patch tokens.
/// Rows follow the grid in reading order; each row holds channel-major,
/// then row-major pixel values.
Mat patchify(const std::array<PlaneD, 3>& planes, int patch_size);

/// Checkpoint directory: manifest.json (format tag, config, stage, seed,
/// parameter-group table with shapes and offsets) and params.bin (float64
/// little-endian values in manifest order).
inline constexpr const char* kCheckpointFormat = "polarkit.checkpoint/1";
void save_checkpoint(const fs::path& dir, const DualStreamModel& model,
                     const nlohmann::json& extra = nlohmann::json::object());
DualStreamModel load_checkpoint(const fs::path& dir);

}  // namespace polarkit::fusion

#endif  // POLARKIT_FUSION_DATA_HPP
