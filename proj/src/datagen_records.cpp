// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "polarkit/datagen.hpp"
#include "polarkit/errors.hpp"
#include "polarkit/serialize.hpp"

namespace polarkit::datagen {

using json = nlohmann::json;

const char* to_string(Scenario s) noexcept {
  return s == Scenario::reflection ? "reflection" : "transparent";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "reflection") return Scenario::reflection;
  if (name == "transparent") return Scenario::transparent;
  fail(ErrorKind::format, "unknown scenario '" + std::string(name) + "'");
}

const char* to_string(CaptionVariant v) noexcept {
  switch (v) {
    case CaptionVariant::geometry: return "geometry";
    case CaptionVariant::spatial_relationship: return "spatial_relationship";
    case CaptionVariant::physical_signal_discrepancy: return "physical_signal_discrepancy";
  }
  return "?";
}

CaptionVariant parse_caption_variant(std::string_view name) {
  for (auto v : {CaptionVariant::geometry, CaptionVariant::spatial_relationship,
                 CaptionVariant::physical_signal_discrepancy}) {
    if (name == to_string(v)) return v;
  }
  fail(ErrorKind::format, "unknown caption variant '" + std::string(name) + "'");
}

namespace {
constexpr Task kAllTasks[] = {Task::glass_detection,     Task::glass_counting,
                              Task::glass_localization,  Task::glass_description,
                              Task::scene_description,   Task::reflection_recognition,
                              Task::counterfactual_reasoning};
}

const char* to_string(Task t) noexcept {
  switch (t) {
    case Task::glass_detection: return "glass_detection";
    case Task::glass_counting: return "glass_counting";
    case Task::glass_localization: return "glass_localization";
    case Task::glass_description: return "glass_description";
    case Task::scene_description: return "scene_description";
    case Task::reflection_recognition: return "reflection_recognition";
    case Task::counterfactual_reasoning: return "counterfactual_reasoning";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (auto t : kAllTasks) {
    if (name == to_string(t)) return t;
  }
  fail(ErrorKind::format, "unknown task '" + std::string(name) + "'");
}

bool is_evaluated_task(Task t) noexcept {
  return t != Task::glass_detection && t != Task::counterfactual_reasoning;
}

Scenario scenario_of(Task t) noexcept {
  switch (t) {
    case Task::glass_detection:
    case Task::glass_counting:
    case Task::glass_localization:
    case Task::glass_description:
      return Scenario::transparent;
    default:
      return Scenario::reflection;
  }
}

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::unassigned: return "unassigned";
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  for (auto s : {Split::unassigned, Split::train, Split::val, Split::test}) {
    if (name == to_string(s)) return s;
  }
  fail(ErrorKind::format, "unknown split '" + std::string(name) + "'");
}

ReflectionSummary summarize(const physics::ReflectionEvidence& ev) {
  return {ev.mean_dolp_inside, ev.mean_rgb_difference_inside, ev.coverage_fraction, ev.pixel_count};
}

void SceneRecord::validate() const {
  require(!scene_id.empty(), ErrorKind::data, "scene record without scene_id");
  if (scenario == Scenario::reflection) {
    require(reflection_evidence.has_value(), ErrorKind::data,
            "reflection scene " + scene_id + " lacks reflection evidence");
    require(glass_instances.empty(), ErrorKind::data,
            "reflection scene " + scene_id + " carries glass instances");
  } else {
    require(!reflection_evidence.has_value() && spurious_set.spurious.empty() &&
                spurious_set.persistent.empty(),
            ErrorKind::data, "transparent scene " + scene_id + " carries reflection fields");
  }
}

json to_json(const SceneRecord& r) {
  json j;
  j["schema"] = "polarkit.scene/1";
  j["scene_id"] = r.scene_id;
  j["scenario"] = to_string(r.scenario);
  j["frame"] = {{"width", r.frame_width}, {"height", r.frame_height}};
  j["detections"] = serialize::to_json(r.detections);
  if (r.scenario == Scenario::reflection) {
    j["spurious_set"] = serialize::to_json(r.spurious_set);
    const auto& ev = *r.reflection_evidence;
    j["reflection_evidence"] = {{"mean_dolp_inside", ev.mean_dolp_inside},
                                {"mean_rgb_difference_inside", ev.mean_rgb_difference_inside},
                                {"coverage_fraction", ev.coverage_fraction},
                                {"pixel_count", ev.pixel_count}};
  } else {
    j["glass_instances"] = json::array();
    for (const auto& g : r.glass_instances) j["glass_instances"].push_back(serialize::to_json(g));
  }
  j["provenance"] = {{"source_dataset", r.provenance.source_dataset},
                     {"thresholds", r.provenance.thresholds}};
  return j;
}

SceneRecord scene_record_from_json(const json& j) {
  SceneRecord r;
  try {
    r.scene_id = j.at("scene_id").get<std::string>();
    r.scenario = parse_scenario(j.at("scenario").get<std::string>());
    if (j.contains("frame")) {
      r.frame_width = j["frame"].value("width", 0);
      r.frame_height = j["frame"].value("height", 0);
    }
    if (j.contains("detections")) r.detections = serialize::detections_from_json(j["detections"]);
    if (j.contains("spurious_set")) r.spurious_set = serialize::spurious_from_json(j["spurious_set"]);
    if (j.contains("reflection_evidence")) {
      const auto& e = j["reflection_evidence"];
      r.reflection_evidence = ReflectionSummary{
          e.at("mean_dolp_inside").get<double>(), e.at("mean_rgb_difference_inside").get<double>(),
          e.at("coverage_fraction").get<double>(), e.value("pixel_count", std::int64_t{0})};
    }
    if (j.contains("glass_instances")) {
      for (const auto& g : j["glass_instances"]) r.glass_instances.push_back(serialize::glass_from_json(g));
    }
    if (j.contains("provenance")) {
      r.provenance.source_dataset = j["provenance"].value("source_dataset", std::string{});
      r.provenance.thresholds = j["provenance"].value("thresholds", json::object());
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed scene record: ") + e.what());
  }
  r.validate();
  return r;
}

// ---- words and numbers ----

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc) || ch == '\'') {
      cur.push_back(char(std::tolower(uc)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

const std::vector<std::string>& unit_words() {
  static const std::vector<std::string> words = {
      "zero",    "one",     "two",       "three",    "four",     "five",    "six",
      "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
      "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen"};
  return words;
}

const std::vector<std::string>& tens_words() {
  static const std::vector<std::string> words = {"twenty", "thirty", "forty", "fifty",
                                                 "sixty",  "seventy", "eighty", "ninety"};
  return words;
}

int index_of(const std::vector<std::string>& words, const std::string& w) {
  auto it = std::find(words.begin(), words.end(), w);
  return it == words.end() ? -1 : int(it - words.begin());
}

}  // namespace

std::optional<std::pair<int, std::size_t>> parse_number_words(const std::vector<std::string>& tokens,
                                                              std::size_t start) {
  if (start >= tokens.size()) return std::nullopt;
  const std::string& t = tokens[start];
  if (std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    if (t.size() > 9) return std::nullopt;
    return std::pair{std::stoi(t), std::size_t{1}};
  }
  const bool next_is_hundred = start + 1 < tokens.size() && tokens[start + 1] == "hundred";
  if ((t == "one" || t == "a") && next_is_hundred) return std::pair{100, std::size_t{2}};
  if (t == "hundred") return std::pair{100, std::size_t{1}};
  if (int u = index_of(unit_words(), t); u >= 0) return std::pair{u, std::size_t{1}};
  if (int d = index_of(tens_words(), t); d >= 0) {
    const int tens = 20 + 10 * d;
    if (start + 1 < tokens.size()) {
      const int u = index_of(unit_words(), tokens[start + 1]);
      if (u >= 1 && u <= 9) return std::pair{tens + u, std::size_t{2}};
    }
    return std::pair{tens, std::size_t{1}};
  }
  return std::nullopt;
}

std::optional<int> first_number(std::string_view text) {
  const auto tokens = tokenize_words(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (auto n = parse_number_words(tokens, i)) return n->first;
  }
  return std::nullopt;
}

// ---- lexicon ----

Lexicon Lexicon::from_json(const json& j) {
  Lexicon lex;
  try {
    lex.version_ = j.at("version").get<int>();
    for (const auto& [category, words] : j.at("categories").items()) {
      auto& phrases = lex.terms_[category];
      for (const auto& w : words) {
        auto tokens = tokenize_words(w.get<std::string>());
        if (!tokens.empty()) phrases.push_back(std::move(tokens));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed lexicon: ") + e.what());
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  require(bool(in), ErrorKind::usage, "cannot open lexicon " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, "lexicon " + file.string() + ": " + e.what());
  }
  return from_json(j);
}

std::vector<Lexicon::Hit> Lexicon::scan(std::string_view text) const {
  const auto tokens = tokenize_words(text);
  std::vector<Hit> hits;
  for (const auto& [category, phrases] : terms_) {
    for (const auto& phrase : phrases) {
      if (phrase.size() > tokens.size()) continue;
      for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + std::ptrdiff_t(i))) {
          std::string term;
          for (const auto& w : phrase) term += (term.empty() ? "" : " ") + w;
          hits.push_back({category, term});
          break;
        }
      }
    }
  }
  return hits;
}

std::string Lexicon::strip(std::string_view label) const {
  auto tokens = tokenize_words(label);
  std::vector<char> drop(tokens.size(), 0);
  for (const auto& [category, phrases] : terms_) {
    for (const auto& phrase : phrases) {
      for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + std::ptrdiff_t(i))) {
          std::fill(drop.begin() + std::ptrdiff_t(i), drop.begin() + std::ptrdiff_t(i + phrase.size()), 1);
        }
      }
    }
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (drop[i]) continue;
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out.empty() ? "object" : out;
}

// ---- templates ----

void TemplateRegistry::add_family(const json& family) {
  try {
    const std::string name = family.at("family").get<std::string>();
    const Scenario scenario = parse_scenario(family.at("scenario").get<std::string>());
    const std::string kind = family.at("kind").get<std::string>();
    require(kind == "caption" || kind == "instruction", ErrorKind::format,
            "template family " + name + " has unknown kind '" + kind + "'");
    for (const auto& t : family.at("templates")) {
      PromptTemplate p;
      p.id = t.at("id").get<std::string>();
      require(!contains(p.id), ErrorKind::format, "duplicate template id " + p.id);
      p.family = name;
      p.scenario = scenario;
      p.kind = kind == "caption" ? TemplateKind::caption : TemplateKind::instruction;
      p.system = family.value("system", std::string{});
      p.body = t.at("body").get<std::string>();
      p.min_words = t.value("min_words", family.value("min_words", 5));
      p.max_words = t.value("max_words", family.value("max_words", 200));
      p.polarization_only = family.value("polarization_only", false);
      if (p.kind == TemplateKind::caption) {
        p.variant = parse_caption_variant(t.at("variant").get<std::string>());
      } else {
        p.task = parse_task(t.at("task").get<std::string>());
        require(scenario_of(*p.task) == scenario, ErrorKind::format,
                "template " + p.id + ": task does not belong to the family scenario");
      }
      templates_.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed template family: ") + e.what());
  }
}

TemplateRegistry TemplateRegistry::load_dir(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::usage,
          "template directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  TemplateRegistry reg;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      reg.add_family(json::parse(in));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::parse, "template file " + f.string() + ": " + e.what());
    }
  }
  return reg;
}

const PromptTemplate& TemplateRegistry::get(std::string_view id) const {
  for (const auto& t : templates_) {
    if (t.id == id) return t;
  }
  fail(ErrorKind::usage, "no prompt template '" + std::string(id) + "'");
}

bool TemplateRegistry::contains(std::string_view id) const {
  return std::any_of(templates_.begin(), templates_.end(), [&](const auto& t) { return t.id == id; });
}

std::vector<std::string> TemplateRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& t : templates_) out.push_back(t.id);
  return out;
}

std::vector<const PromptTemplate*> TemplateRegistry::for_scenario(Scenario scenario) const {
  std::vector<const PromptTemplate*> out;
  for (const auto& t : templates_) {
    if (t.scenario == scenario) out.push_back(&t);
  }
  return out;
}

// ---- samples ----

namespace {

json context_json(const VerificationContext& c) {
  json j = {{"template_id", c.template_id}};
  if (c.instance_count) j["instance_count"] = *c.instance_count;
  if (c.referenced_object) j["referenced_object"] = *c.referenced_object;
  return j;
}

VerificationContext context_from_json(const json& j) {
  VerificationContext c;
  c.template_id = j.at("template_id").get<std::string>();
  if (j.contains("instance_count")) c.instance_count = j["instance_count"].get<int>();
  if (j.contains("referenced_object")) c.referenced_object = j["referenced_object"].get<std::string>();
  return c;
}

}  // namespace

json to_json(const CaptionSample& s) {
  return {{"schema", kCaptionSchema},         {"scene_id", s.scene_id},
          {"scenario", to_string(s.scenario)}, {"variant", to_string(s.variant)},
          {"text", s.text},                    {"split", to_string(s.split)},
          {"verification", context_json(s.context)}};
}

json to_json(const InstructionSample& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back({{"question", t.question}, {"answer", t.answer}});
  return {{"schema", kInstructionSchema},      {"scene_id", s.scene_id},
          {"scenario", to_string(s.scenario)}, {"task", to_string(s.task)},
          {"turns", turns},                    {"split", to_string(s.split)},
          {"verification", context_json(s.context)}};
}

CaptionSample caption_from_json(const json& j) {
  try {
    require(j.at("schema").get<std::string>() == kCaptionSchema, ErrorKind::format,
            "caption record has unsupported schema");
    CaptionSample s;
    s.scene_id = j.at("scene_id").get<std::string>();
    s.scenario = parse_scenario(j.at("scenario").get<std::string>());
    s.variant = parse_caption_variant(j.at("variant").get<std::string>());
    s.text = j.at("text").get<std::string>();
    s.split = parse_split(j.value("split", std::string("unassigned")));
    s.context = context_from_json(j.at("verification"));
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed caption record: ") + e.what());
  }
}

InstructionSample instruction_from_json(const json& j) {
  try {
    require(j.at("schema").get<std::string>() == kInstructionSchema, ErrorKind::format,
            "instruction record has unsupported schema");
    InstructionSample s;
    s.scene_id = j.at("scene_id").get<std::string>();
    s.scenario = parse_scenario(j.at("scenario").get<std::string>());
    s.task = parse_task(j.at("task").get<std::string>());
    for (const auto& t : j.at("turns")) {
      s.turns.push_back({t.at("question").get<std::string>(), t.at("answer").get<std::string>()});
    }
    s.split = parse_split(j.value("split", std::string("unassigned")));
    s.context = context_from_json(j.at("verification"));
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed instruction record: ") + e.what());
  }
}

}  // namespace polarkit::datagen
