// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/fusion/data.hpp"

#include <cstring>
#include <map>

#include "polarkit/datagen.hpp"
#include "polarkit/errors.hpp"
#include "polarkit/io.hpp"

namespace polarkit::fusion {

using json = nlohmann::json;

Tokenizer Tokenizer::load(const fs::path& file) { return from_json(io::read_json(file)); }

Tokenizer Tokenizer::from_json(const json& j) {
  Tokenizer t;
  try {
    t.tokens_ = j.at("tokens").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed vocabulary: ") + e.what());
  }
  require(t.tokens_.size() >= 4 && t.tokens_[0] == "<pad>" && t.tokens_[1] == "<bos>" && t.tokens_[2] == "<eos>" &&
              t.tokens_[3] == "<unk>",
          ErrorKind::format, "vocabulary must start with <pad>, <bos>, <eos>, <unk>");
  for (std::size_t i = 0; i < t.tokens_.size(); ++i) {
    require(t.ids_.emplace(t.tokens_[i], int(i)).second, ErrorKind::format,
            "duplicate vocabulary entry '" + t.tokens_[i] + "'");
  }
  return t;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : datagen::tokenize_words(text)) {
    auto it = ids_.find(w);
    out.push_back(it == ids_.end() ? unk() : it->second);
  }
  return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    require(id >= 0 && id < size(), ErrorKind::usage, "token id outside the vocabulary");
    out += (out.empty() ? "" : " ") + tokens_[std::size_t(id)];
  }
  return out;
}

Mat patchify(const std::array<PlaneD, 3>& planes, int patch_size) {
  const Eigen::Index h = planes[0].rows();
  const Eigen::Index w = planes[0].cols();
  for (const auto& p : planes) require(same_shape(p, planes[0]), ErrorKind::structural, "patchify: plane shapes differ");
  require(patch_size > 0 && h % patch_size == 0 && w % patch_size == 0 && h == w, ErrorKind::structural,
          "patchify: planes must be square multiples of the patch size");
  const Eigen::Index grid = h / patch_size;
  const Eigen::Index p2 = Eigen::Index(patch_size) * patch_size;
  Mat tokens(grid * grid, 3 * p2);
  for (Eigen::Index gy = 0; gy < grid; ++gy) {
    for (Eigen::Index gx = 0; gx < grid; ++gx) {
      for (int ch = 0; ch < 3; ++ch) {
        const auto block = planes[std::size_t(ch)].block(gy * patch_size, gx * patch_size, patch_size, patch_size);
        for (int y = 0; y < patch_size; ++y) {
          for (int x = 0; x < patch_size; ++x) tokens(gy * grid + gx, ch * p2 + y * patch_size + x) = block(y, x);
        }
      }
    }
  }
  return tokens;
}

void save_checkpoint(const fs::path& dir, const DualStreamModel& model, const json& extra) {
  json params = json::array();
  std::map<std::string, std::vector<std::string>> groups;
  std::string blob;
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name},
                      {"group", to_string(p.group)},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"offset", blob.size()}});
    groups[to_string(p.group)].push_back(p.name);
    const std::size_t at = blob.size();
    blob.resize(at + std::size_t(p.value.size()) * sizeof(double));
    std::memcpy(blob.data() + at, p.value.data(), std::size_t(p.value.size()) * sizeof(double));
  }
  io::write_atomic(dir / "params.bin", blob);
  io::write_json(dir / "manifest.json", {{"format", kCheckpointFormat},
                                         {"config", to_json(model.config())},
                                         {"stage", to_string(model.stage())},
                                         {"seed", model.config().seed},
                                         {"blob", "params.bin"},
                                         {"groups", groups},
                                         {"parameters", params},
                                         {"extra", extra}});
}

DualStreamModel load_checkpoint(const fs::path& dir) {
  const json manifest = io::read_json(dir / "manifest.json");
  require(manifest.value("format", std::string{}) == kCheckpointFormat, ErrorKind::format,
          dir.string() + ": not a " + std::string(kCheckpointFormat) + " checkpoint");
  DualStreamModel model(model_config_from_json(manifest.at("config")));
  const std::string blob = io::read_file(dir / manifest.value("blob", std::string("params.bin")));
  const auto& entries = manifest.at("parameters");
  require(entries.size() == model.parameters().size(), ErrorKind::format,
          dir.string() + ": parameter table does not match the configured model");
  std::size_t k = 0;
  for (auto& p : model.parameters()) {
    const auto& e = entries[k++];
    require(e.at("name").get<std::string>() == p.name && e.at("rows").get<Eigen::Index>() == p.value.rows() &&
                e.at("cols").get<Eigen::Index>() == p.value.cols() &&
                parse_param_group(e.at("group").get<std::string>()) == p.group,
            ErrorKind::format, dir.string() + ": parameter " + p.name + " does not match the manifest");
    const std::size_t offset = e.at("offset").get<std::size_t>();
    const std::size_t bytes = std::size_t(p.value.size()) * sizeof(double);
    require(offset + bytes <= blob.size(), ErrorKind::format, dir.string() + ": params.bin is truncated");
    std::memcpy(p.value.data(), blob.data() + offset, bytes);
  }
  return model;
}

}  // namespace polarkit::fusion
