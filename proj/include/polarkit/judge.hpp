// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_JUDGE_HPP
#define POLARKIT_JUDGE_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polarkit/chat_client.hpp"
#include "polarkit/datagen.hpp"

namespace polarkit::judge {

using datagen::Task;

/// Column order of the results table.
inline constexpr std::array<Task, 5> kJudgedTasks = {Task::glass_counting, Task::glass_localization,
                                                     Task::glass_description, Task::scene_description,
                                                     Task::reflection_recognition};
const char* short_label(Task t) noexcept;  // "Glass Count", ...

/// First standalone integer in [1, 10]: digits not touching letters, other
/// digits, or a decimal point. Out-of-range integers are skipped.
std::optional<int> extract_score(std::string_view response);

struct JudgePrompt {
  Task task = Task::glass_counting;
  std::string system;
  std::string body;  // {{question}}, {{reference}}, {{prediction}} placeholders
};

class PromptRegistry {
 public:
  /// One JSON file holding {"version": N, "reprompt": "...", "prompts": [{task, system, body}]}.
  static PromptRegistry load(const std::filesystem::path& file);
  static PromptRegistry from_json(const nlohmann::json& j);

  const JudgePrompt& get(Task t) const;
  const std::string& reprompt() const { return reprompt_; }

 private:
  std::map<Task, JudgePrompt> prompts_;
  std::string reprompt_;
};

struct EvalItem {
  std::string id;
  Task task = Task::glass_counting;
  std::string question;
  std::string reference;
  std::string prediction;
};

struct JudgedSample {
  EvalItem item;
  std::vector<int> scores;
  std::optional<double> final_score;  // mean of repeats; empty when flagged
  bool flagged = false;
  std::string error;

  nlohmann::json to_json() const;
};

struct JudgeSettings {
  std::string model = "gpt-4o-mini";
  int repeats = 3;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
};

/// `repeats` temperature-0 calls; an unparseable reply gets one structured
/// re-prompt, after which the sample is flagged with a scoring error.
JudgedSample judge(const EvalItem& item, ChatClient& client, const PromptRegistry& prompts,
                   const JudgeSettings& settings, const Sleeper& sleep = real_sleeper());

std::vector<JudgedSample> judge_all(const std::vector<EvalItem>& items, ChatClient& client,
                                    const PromptRegistry& prompts, const JudgeSettings& settings,
                                    const Sleeper& sleep = real_sleeper());

struct TaskResult {
  std::int64_t count = 0;    // N_t, valid samples
  double sum = 0;            // sum of final scores
  double mean = 0;
  std::int64_t flagged = 0;  // excluded
};

struct ResultTable {
  std::map<Task, TaskResult> tasks;
  double overall = 0;  // sum over every valid score / total valid count
  std::int64_t total = 0;
  std::int64_t flagged = 0;

  nlohmann::json to_json() const;
  /// Aligned columns in the results-table layout: per-task columns, then Overall.
  std::string format(std::string_view row_label) const;
};

/// Throws empty_evaluation when no sample is valid.
ResultTable aggregate(const std::vector<JudgedSample>& samples);

/// Joins references ({id, task, question, answer}) with predictions ({id, prediction}).
std::vector<EvalItem> join_items(const std::vector<nlohmann::json>& references,
                                 const std::vector<nlohmann::json>& predictions);

/// Deterministic offline judge: scores 1 + round(9 * F1) of word overlap
/// between reference and prediction, read from request metadata.
class StubJudgeClient : public ChatClient {
 public:
  std::string complete(const ChatRequest& request) override;
};

/// Token-overlap F1 used by the offline judge.
double overlap_f1(std::string_view reference, std::string_view prediction);

}  // namespace polarkit::judge

#endif  // POLARKIT_JUDGE_HPP
