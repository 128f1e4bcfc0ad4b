// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/judge.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "polarkit/errors.hpp"
#include "polarkit/io.hpp"

namespace polarkit::judge {

using json = nlohmann::json;

const char* short_label(Task t) noexcept {
  switch (t) {
    case Task::glass_counting: return "Glass Count";
    case Task::glass_localization: return "Glass Loc.";
    case Task::glass_description: return "Glass Desc.";
    case Task::scene_description: return "Scene Desc.";
    case Task::reflection_recognition: return "Refl. Recog.";
    default: return datagen::to_string(t);
  }
}

std::optional<int> extract_score(std::string_view s) {
  auto digit = [&](std::size_t i) { return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); };
  auto word = [&](std::size_t i) { return i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'); };
  std::size_t i = 0;
  while (i < s.size()) {
    if (!digit(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (digit(j)) ++j;
    const bool before_ok = i == 0 || (!word(i - 1) && s[i - 1] != '.' && s[i - 1] != '-');
    const bool after_ok = !word(j) && !(j < s.size() && s[j] == '.' && digit(j + 1));
    if (before_ok && after_ok && j - i <= 2) {
      const int v = std::stoi(std::string(s.substr(i, j - i)));
      if (v >= 1 && v <= 10) return v;
    }
    i = j;
  }
  return std::nullopt;
}

PromptRegistry PromptRegistry::load(const std::filesystem::path& file) { return from_json(io::read_json(file)); }

PromptRegistry PromptRegistry::from_json(const json& j) {
  PromptRegistry r;
  try {
    r.reprompt_ = j.value("reprompt", std::string("Reply with only the integer score from 1 to 10."));
    for (const auto& p : j.at("prompts")) {
      JudgePrompt jp;
      jp.task = datagen::parse_task(p.at("task").get<std::string>());
      require(datagen::is_evaluated_task(jp.task), ErrorKind::usage,
              std::string("no judging protocol for task ") + datagen::to_string(jp.task));
      jp.system = p.value("system", std::string{});
      jp.body = p.at("body").get<std::string>();
      r.prompts_[jp.task] = std::move(jp);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed judge prompts: ") + e.what());
  }
  return r;
}

const JudgePrompt& PromptRegistry::get(Task t) const {
  auto it = prompts_.find(t);
  require(it != prompts_.end(), ErrorKind::usage,
          std::string("no judge prompt registered for task ") + datagen::to_string(t));
  return it->second;
}

json JudgedSample::to_json() const {
  json j = {{"id", item.id},          {"task", datagen::to_string(item.task)},
            {"scores", scores},       {"flagged", flagged}};
  j["final_score"] = final_score ? json(*final_score) : json(nullptr);
  if (!error.empty()) j["error"] = error;
  return j;
}

namespace {

std::string fill(std::string text, const EvalItem& item) {
  auto sub = [&](const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
      text.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  sub("{{question}}", item.question);
  sub("{{reference}}", item.reference);
  sub("{{prediction}}", item.prediction);
  return text;
}

}  // namespace

JudgedSample judge(const EvalItem& item, ChatClient& client, const PromptRegistry& prompts,
                   const JudgeSettings& settings, const Sleeper& sleep) {
  require(settings.repeats >= 1, ErrorKind::usage, "judge repeats must be at least 1");
  const JudgePrompt& p = prompts.get(item.task);
  JudgedSample out;
  out.item = item;
  for (int r = 0; r < settings.repeats; ++r) {
    ChatRequest req;
    req.model = settings.model;
    req.temperature = 0.0;
    if (!p.system.empty()) req.messages.push_back({"system", p.system});
    req.messages.push_back({"user", fill(p.body, item)});
    req.key = item.id + "/repeat" + std::to_string(r);
    req.metadata = {{"reference", item.reference}, {"prediction", item.prediction}, {"task", datagen::to_string(item.task)}};
    std::string reply = complete_with_retry(client, req, settings.retry, nullptr, sleep);
    std::optional<int> score = extract_score(reply);
    if (!score) {
      req.messages.push_back({"assistant", reply});
      req.messages.push_back({"user", prompts.reprompt()});
      req.key += "/reprompt";
      req.metadata["reprompt"] = "1";
      reply = complete_with_retry(client, req, settings.retry, nullptr, sleep);
      score = extract_score(reply);
    }
    if (!score) {
      out.flagged = true;
      out.error = std::string(to_string(ErrorKind::scoring)) + ": no score in 1-10 after re-prompt (repeat " +
                  std::to_string(r) + ")";
      out.scores.clear();
      return out;
    }
    out.scores.push_back(*score);
  }
  double sum = 0;
  for (int s : out.scores) sum += s;
  out.final_score = sum / double(out.scores.size());
  return out;
}

std::vector<JudgedSample> judge_all(const std::vector<EvalItem>& items, ChatClient& client,
                                    const PromptRegistry& prompts, const JudgeSettings& settings,
                                    const Sleeper& sleep) {
  std::vector<JudgedSample> out(items.size());
  run_bounded(items.size(), settings.max_in_flight,
              [&](std::size_t i) { out[i] = judge(items[i], client, prompts, settings, sleep); });
  return out;
}

ResultTable aggregate(const std::vector<JudgedSample>& samples) {
  ResultTable t;
  double grand = 0;
  for (const auto& s : samples) {
    TaskResult& r = t.tasks[s.item.task];
    if (s.flagged || !s.final_score) {
      ++r.flagged;
      ++t.flagged;
      continue;
    }
    ++r.count;
    r.sum += *s.final_score;
    grand += *s.final_score;
    ++t.total;
  }
  require(t.total > 0, ErrorKind::empty_evaluation, "no valid judged samples");
  for (auto& [task, r] : t.tasks) r.mean = r.count ? r.sum / double(r.count) : 0.0;
  t.overall = grand / double(t.total);
  return t;
}

json ResultTable::to_json() const {
  json tasks_json = json::object();
  for (const auto& [task, r] : tasks) {
    tasks_json[datagen::to_string(task)] = {
        {"count", r.count}, {"sum", r.sum}, {"mean", r.mean}, {"flagged", r.flagged}};
  }
  return {{"tasks", tasks_json}, {"overall", overall}, {"total", total}, {"flagged", flagged},
          {"overall_definition", "sum of valid sample scores / number of valid samples"}};
}

std::string ResultTable::format(std::string_view row_label) const {
  char buf[64];
  std::string header = "Model";
  std::string row(row_label);
  const std::size_t label_width = std::max<std::size_t>(row.size(), 5) + 2;
  header.resize(label_width, ' ');
  row.resize(label_width, ' ');
  auto cell = [&](std::string_view title, const std::string& value) {
    const std::size_t w = std::max(title.size(), value.size()) + 2;
    std::string h(title), v(value);
    h.insert(h.begin(), w - h.size(), ' ');
    v.insert(v.begin(), w - v.size(), ' ');
    header += h;
    row += v;
  };
  for (Task task : kJudgedTasks) {
    auto it = tasks.find(task);
    if (it == tasks.end() || it->second.count == 0) {
      cell(short_label(task), "--");
    } else {
      std::snprintf(buf, sizeof buf, "%.2f", it->second.mean);
      cell(short_label(task), buf);
    }
  }
  std::snprintf(buf, sizeof buf, "%.2f", overall);
  cell("Overall", buf);
  std::string out = header + "\n" + row + "\n";
  if (flagged > 0) out += "(" + std::to_string(flagged) + " flagged samples excluded)\n";
  return out;
}

std::vector<EvalItem> join_items(const std::vector<json>& references, const std::vector<json>& predictions) {
  std::map<std::string, std::string> pred;
  try {
    for (const auto& p : predictions) {
      const std::string id = p.at("id").get<std::string>();
      require(pred.emplace(id, p.at("prediction").get<std::string>()).second, ErrorKind::integrity,
              "duplicate prediction for " + id);
    }
    std::vector<EvalItem> items;
    std::vector<std::string> missing;
    for (const auto& r : references) {
      EvalItem it;
      it.id = r.at("id").get<std::string>();
      it.task = datagen::parse_task(r.at("task").get<std::string>());
      require(datagen::is_evaluated_task(it.task), ErrorKind::usage,
              "reference " + it.id + " has non-evaluated task " + datagen::to_string(it.task));
      it.question = r.at("question").get<std::string>();
      it.reference = r.at("answer").get<std::string>();
      auto found = pred.find(it.id);
      if (found == pred.end()) {
        missing.push_back(it.id);
        continue;
      }
      it.prediction = found->second;
      items.push_back(std::move(it));
    }
    if (!missing.empty()) {
      std::string msg = "references without predictions:";
      for (const auto& m : missing) msg += " " + m;
      fail(ErrorKind::integrity, msg);
    }
    return items;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed evaluation record: ") + e.what());
  }
}

double overlap_f1(std::string_view reference, std::string_view prediction) {
  const auto ref = datagen::tokenize_words(reference);
  const auto pred = datagen::tokenize_words(prediction);
  if (ref.empty() || pred.empty()) return 0.0;
  std::multiset<std::string> pool(ref.begin(), ref.end());
  std::size_t common = 0;
  for (const auto& w : pred) {
    auto it = pool.find(w);
    if (it != pool.end()) {
      pool.erase(it);
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = double(common) / double(pred.size());
  const double recall = double(common) / double(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::string StubJudgeClient::complete(const ChatRequest& request) {
  auto ref = request.metadata.find("reference");
  auto pred = request.metadata.find("prediction");
  require(ref != request.metadata.end() && pred != request.metadata.end(), ErrorKind::usage,
          "offline judge needs reference and prediction metadata");
  const int score = 1 + int(std::lround(9.0 * overlap_f1(ref->second, pred->second)));
  return "Score: " + std::to_string(score);
}

}  // namespace polarkit::judge
