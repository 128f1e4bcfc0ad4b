// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "polarkit/errors.hpp"

namespace polarkit::io {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

void write_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(bool(out), ErrorKind::format, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    require(bool(out), ErrorKind::format, "write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::format, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) { write_atomic(path, doc.dump(2) + "\n"); }

std::vector<json> read_jsonl(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<json>& records) {
  std::string text;
  for (const auto& r : records) text += r.dump() + "\n";
  write_atomic(path, text);
}

namespace {

fs::path sidecar(const fs::path& path) {
  fs::path s = path;
  s += ".json";
  return s;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos, const fs::path& path) {
  require(pos + sizeof(T) <= in.size(), ErrorKind::format, path.string() + ": truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

RawMosaicFile read_raw_mosaic(const fs::path& path) {
  const json meta = read_json(sidecar(path));
  RawMosaicFile file;
  Eigen::Index h = 0, w = 0;
  try {
    h = meta.at("height").get<Eigen::Index>();
    w = meta.at("width").get<Eigen::Index>();
    file.frame.layout = MosaicLayout::parse(meta.value("layout", std::string("0,45,90,135")));
    file.transfer = meta.value("transfer", std::string("linear"));
    require(meta.value("bit_depth", 16) == 16, ErrorKind::format, "only 16-bit raw mosaics are supported");
  } catch (const json::exception& e) {
    fail(ErrorKind::format, sidecar(path).string() + ": " + e.what());
  }
  const std::string bytes = read_file(path);
  require(h > 0 && w > 0 && bytes.size() == std::size_t(h * w) * 2, ErrorKind::format,
          path.string() + ": expected " + std::to_string(h * w * 2) + " bytes, found " + std::to_string(bytes.size()));
  file.frame.samples.resize(h, w);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) file.frame.samples(r, c) = get<std::uint16_t>(bytes, pos, path);
  }
  file.frame.validate();
  return file;
}

void write_raw_mosaic(const fs::path& path, const RawMosaicFrame& frame, std::string_view transfer) {
  frame.validate();
  std::string bytes;
  bytes.reserve(std::size_t(frame.samples.size()) * 2);
  for (Eigen::Index r = 0; r < frame.height(); ++r) {
    for (Eigen::Index c = 0; c < frame.width(); ++c) {
      const double v = frame.samples(r, c);
      require(v >= 0 && v <= 65535 && v == std::floor(v), ErrorKind::data,
              "sample at (" + std::to_string(r) + ", " + std::to_string(c) + ") is not a 16-bit integer");
      put(bytes, std::uint16_t(v));
    }
  }
  write_atomic(path, bytes);
  write_json(sidecar(path), {{"height", frame.height()},
                             {"width", frame.width()},
                             {"layout", frame.layout.to_string()},
                             {"bit_depth", 16},
                             {"byte_order", "little"},
                             {"transfer", transfer}});
}

const PlaneD& FloatMap::channel(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return planes[k];
  }
  fail(ErrorKind::format, "float map has no channel '" + std::string(name) + "'");
}

namespace {
constexpr char kMagic[6] = {'P', 'K', 'F', 'M', 'A', 'P'};
}

FloatMap read_float_map(const fs::path& path) {
  const std::string bytes = read_file(path);
  require(bytes.size() >= 6 && std::memcmp(bytes.data(), kMagic, 6) == 0, ErrorKind::format,
          path.string() + ": not a float map");
  std::size_t pos = 6;
  const auto version = get<std::uint16_t>(bytes, pos, path);
  require(version == kFloatMapVersion, ErrorKind::format,
          path.string() + ": unsupported float map version " + std::to_string(version));
  const auto h = get<std::uint32_t>(bytes, pos, path);
  const auto w = get<std::uint32_t>(bytes, pos, path);
  const auto n = get<std::uint32_t>(bytes, pos, path);
  const auto header_len = get<std::uint32_t>(bytes, pos, path);
  require(pos + header_len <= bytes.size(), ErrorKind::format, path.string() + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::format, path.string() + ": bad header: " + e.what());
  }
  pos += header_len;
  require(bytes.size() - pos == std::size_t(h) * w * n * 4, ErrorKind::format,
          path.string() + ": payload size does not match the header");
  FloatMap map;
  map.names = header.at("channels").get<std::vector<std::string>>();
  require(map.names.size() == n, ErrorKind::format, path.string() + ": channel count mismatch");
  map.meta = header.value("meta", json::object());
  for (std::uint32_t k = 0; k < n; ++k) {
    PlaneD p(h, w);
    for (std::uint32_t r = 0; r < h; ++r) {
      for (std::uint32_t c = 0; c < w; ++c) p(r, c) = get<float>(bytes, pos, path);
    }
    map.planes.push_back(std::move(p));
  }
  return map;
}

void write_float_map(const fs::path& path, const FloatMap& map) {
  require(!map.planes.empty() && map.planes.size() == map.names.size(), ErrorKind::structural,
          "float map needs one name per plane");
  for (const auto& p : map.planes) {
    require(same_shape(p, map.planes.front()), ErrorKind::structural, "float map planes differ in dimensions");
  }
  const std::string header = json{{"channels", map.names}, {"meta", map.meta}}.dump();
  std::string bytes(kMagic, 6);
  put(bytes, kFloatMapVersion);
  put(bytes, std::uint32_t(map.planes.front().rows()));
  put(bytes, std::uint32_t(map.planes.front().cols()));
  put(bytes, std::uint32_t(map.planes.size()));
  put(bytes, std::uint32_t(header.size()));
  bytes += header;
  for (const auto& p : map.planes) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) put(bytes, float(p(r, c)));
    }
  }
  write_atomic(path, bytes);
}

}  // namespace polarkit::io
