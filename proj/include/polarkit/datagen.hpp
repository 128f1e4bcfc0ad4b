// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_DATAGEN_HPP
#define POLARKIT_DATAGEN_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polarkit/chat_client.hpp"
#include "polarkit/physics.hpp"

namespace polarkit::datagen {

enum class Scenario { reflection, transparent };
const char* to_string(Scenario s) noexcept;
Scenario parse_scenario(std::string_view name);

enum class CaptionVariant { geometry, spatial_relationship, physical_signal_discrepancy };
const char* to_string(CaptionVariant v) noexcept;
CaptionVariant parse_caption_variant(std::string_view name);

enum class Task {
  glass_detection,
  glass_counting,
  glass_localization,
  glass_description,
  scene_description,
  reflection_recognition,
  counterfactual_reasoning,
};
const char* to_string(Task t) noexcept;
Task parse_task(std::string_view name);
/// The five tasks admitted to the test split.
bool is_evaluated_task(Task t) noexcept;
Scenario scenario_of(Task t) noexcept;

/// Reflection evidence without the per-pixel mask.
struct ReflectionSummary {
  double mean_dolp_inside = 0;
  double mean_rgb_difference_inside = 0;
  double coverage_fraction = 0;
  std::int64_t pixel_count = 0;
};

ReflectionSummary summarize(const physics::ReflectionEvidence& evidence);

struct Provenance {
  std::string source_dataset;
  nlohmann::json thresholds = nlohmann::json::object();
};

struct SceneRecord {
  std::string scene_id;
  Scenario scenario = Scenario::transparent;
  physics::DetectionList detections;
  physics::SpuriousObjectSet spurious_set;                 // reflection scenes
  std::optional<ReflectionSummary> reflection_evidence;    // reflection scenes
  std::vector<physics::GlassInstanceStats> glass_instances;  // transparent scenes
  int frame_width = 0;
  int frame_height = 0;
  Provenance provenance;

  /// Scenario-specific fields are populated iff the scenario matches.
  void validate() const;
};

nlohmann::json to_json(const SceneRecord& record);
SceneRecord scene_record_from_json(const nlohmann::json& j);

/// Versioned word lists used to strip and detect RGB-only semantics.
class Lexicon {
 public:
  static Lexicon load(const std::filesystem::path& file);
  static Lexicon from_json(const nlohmann::json& j);

  struct Hit {
    std::string category;  // "color" | "texture" | "readable_text"
    std::string term;
  };

  int version() const { return version_; }
  std::vector<Hit> scan(std::string_view text) const;
  /// Removes lexicon words from a detection label; an emptied label becomes "object".
  std::string strip(std::string_view label) const;

 private:
  int version_ = 0;
  std::map<std::string, std::vector<std::vector<std::string>>> terms_;  // category -> tokenized phrases
};

/// Lower-cased alphanumeric/apostrophe tokens.
std::vector<std::string> tokenize_words(std::string_view text);

/// Parses digits or English number words (zero to one hundred) at the start of
/// the token range; returns the value and the number of tokens consumed.
std::optional<std::pair<int, std::size_t>> parse_number_words(const std::vector<std::string>& tokens,
                                                              std::size_t start);
/// First number mentioned in a text, in digits or words.
std::optional<int> first_number(std::string_view text);

enum class TemplateKind { caption, instruction };

struct PromptTemplate {
  std::string id;
  std::string family;  // stage1_reflection_caption, stage1_glass_caption, ...
  Scenario scenario = Scenario::transparent;
  TemplateKind kind = TemplateKind::caption;
  std::optional<CaptionVariant> variant;
  std::optional<Task> task;
  std::string system;
  std::string body;  // {{facts}}, {{variant}}, {{task}}, {{target}} placeholders
  int min_words = 5;
  int max_words = 200;
  bool polarization_only = false;  // strips RGB semantics and applies the lexical rule
};

class TemplateRegistry {
 public:
  /// Loads every *.json family file in a directory.
  static TemplateRegistry load_dir(const std::filesystem::path& dir);
  void add_family(const nlohmann::json& family);

  const PromptTemplate& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::vector<std::string> ids() const;
  /// Templates applicable to a record, in registry order.
  std::vector<const PromptTemplate*> for_scenario(Scenario scenario) const;

 private:
  std::vector<PromptTemplate> templates_;
};

/// Facts the verifier needs; persisted alongside every accepted sample.
struct VerificationContext {
  std::string template_id;
  std::optional<int> instance_count;            // glass_counting
  std::optional<std::string> referenced_object;  // counterfactual_reasoning
};

struct GenerationJob {
  std::string key;  // scene_id/template_id
  std::string scene_id;
  Scenario scenario = Scenario::transparent;
  const PromptTemplate* prompt_template = nullptr;
  std::string structured_facts;
  std::string prompt;
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  RetryPolicy retry;
  VerificationContext context;

  ChatRequest request() const;
};

struct ClientSettings {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  RetryPolicy retry;
};

/// Pure function of (record, template, lexicon, settings).
GenerationJob assemble_prompt(const SceneRecord& record, const PromptTemplate& tmpl,
                              const Lexicon& lexicon, const ClientSettings& settings = {});
GenerationJob assemble_prompt(const SceneRecord& record, const TemplateRegistry& registry,
                              std::string_view template_id, const Lexicon& lexicon,
                              const ClientSettings& settings = {});

std::string generate(const GenerationJob& job, ChatClient& client, AttemptLog* log = nullptr,
                     const Sleeper& sleep = real_sleeper());

/// Deterministic offline client: fills a fixed response pattern from the job
/// metadata carried in the request.
class StubGenerationClient : public ChatClient {
 public:
  std::string complete(const ChatRequest& request) override;
};

struct Rejection {
  std::string code;
  std::string detail;
};

struct Verdict {
  std::vector<Rejection> reasons;
  bool accepted() const { return reasons.empty(); }
  bool has(std::string_view code) const;
};

struct VerificationRules {
  bool check_structure = true;
  bool check_lexical = true;
  bool check_numeric = true;
  bool check_counterfactual = true;
};

struct Turn {
  std::string question;
  std::string answer;
};

/// Instruction responses are JSON: {"turns": [{"question": ..., "answer": ...}]}.
std::optional<std::vector<Turn>> parse_turns(std::string_view response);

Verdict verify(std::string_view response, const PromptTemplate& tmpl,
               const VerificationContext& context, const Lexicon& lexicon,
               const VerificationRules& rules = {});

enum class Split { unassigned, train, val, test };
const char* to_string(Split s) noexcept;
Split parse_split(std::string_view name);

inline constexpr const char* kCaptionSchema = "polarkit.caption/1";
inline constexpr const char* kInstructionSchema = "polarkit.instruction/1";

struct CaptionSample {
  std::string scene_id;
  Scenario scenario = Scenario::transparent;
  CaptionVariant variant = CaptionVariant::geometry;
  std::string text;
  Split split = Split::unassigned;
  VerificationContext context;
};

struct InstructionSample {
  std::string scene_id;
  Scenario scenario = Scenario::transparent;
  Task task = Task::glass_detection;
  std::vector<Turn> turns;
  Split split = Split::unassigned;
  VerificationContext context;
};

nlohmann::json to_json(const CaptionSample& s);
nlohmann::json to_json(const InstructionSample& s);
CaptionSample caption_from_json(const nlohmann::json& j);
InstructionSample instruction_from_json(const nlohmann::json& j);

/// Re-checks a persisted sample against its template and stored context.
Verdict reverify(const CaptionSample& sample, const TemplateRegistry& registry, const Lexicon& lexicon);
Verdict reverify(const InstructionSample& sample, const TemplateRegistry& registry,
                 const Lexicon& lexicon);

struct GenerationOutcome {
  std::vector<CaptionSample> captions;
  std::vector<InstructionSample> instructions;
  struct Rejected {
    std::string key;
    std::string response;
    Verdict verdict;
  };
  std::vector<Rejected> rejected;
  std::vector<std::string> skipped;  // template not applicable to the record (e.g. no spurious object)
  std::vector<std::pair<std::string, std::string>> failed;  // key, error
};

struct PipelineOptions {
  ClientSettings client;
  std::size_t max_in_flight = 4;
  VerificationRules rules;
};

/// assemble -> generate -> verify for every applicable template of every record.
GenerationOutcome run_generation(const std::vector<SceneRecord>& records,
                                 const TemplateRegistry& registry, const Lexicon& lexicon,
                                 ChatClient& client, const PipelineOptions& options,
                                 AttemptLog* log = nullptr, const Sleeper& sleep = real_sleeper());

// ---- split composition ----

struct ComposeItem {
  std::string scene_id;
  Scenario scenario = Scenario::transparent;
  std::string category;  // caption variant or task name
};

struct SplitTarget {
  Split split = Split::train;
  std::int64_t count = 0;
  /// Categories admitted to this split; empty admits all.
  std::vector<std::string> allowed_categories;
};

struct CompositionTargets {
  std::vector<SplitTarget> splits;
  std::map<Scenario, std::int64_t> scenario_totals;  // optional balance
  std::uint64_t seed = 0;
};

/// Default composition targets: captions train/val, instructions train/val/test
/// with the test split restricted to the evaluated tasks.
CompositionTargets caption_targets(std::int64_t train, std::int64_t val,
                                   std::map<Scenario, std::int64_t> scenario_totals = {},
                                   std::uint64_t seed = 0);
CompositionTargets instruction_targets(std::int64_t train, std::int64_t val, std::int64_t test,
                                       std::map<Scenario, std::int64_t> scenario_totals = {},
                                       std::uint64_t seed = 0);

struct CompositionReport {
  std::map<std::string, std::int64_t> split_totals;
  std::map<std::string, std::int64_t> scenario_totals;
  /// split -> scenario -> category -> count
  std::map<std::string, std::map<std::string, std::map<std::string, std::int64_t>>> cells;
  std::int64_t unassigned = 0;
  std::int64_t scenes = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct Composition {
  std::vector<Split> assignment;  // parallel to the input items
  CompositionReport report;
};

/// Scene-disjoint split assignment hitting exact per-split counts (and
/// scenario totals when given). Throws composition on infeasible targets.
Composition compose_splits(const std::vector<ComposeItem>& items, const CompositionTargets& targets);

/// Throws composition if any scene spans more than one assigned split.
void check_scene_disjoint(const std::vector<ComposeItem>& items, const std::vector<Split>& assignment);

}  // namespace polarkit::datagen

#endif  // POLARKIT_DATAGEN_HPP
