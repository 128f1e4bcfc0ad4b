// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <set>

#include "polarkit/datagen.hpp"
#include "polarkit/errors.hpp"

namespace polarkit::datagen {

using json = nlohmann::json;

namespace {

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string percent(double fraction) { return fixed(100.0 * fraction, 1); }

std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::vector<std::string> labels_of(const physics::DetectionList& list, const Lexicon& lexicon, bool strip) {
  std::vector<std::string> out;
  for (const auto& d : list) out.push_back(strip ? lexicon.strip(d.label) : d.label);
  return out;
}

// Fact lines and a machine-readable copy used by the offline client.
struct Facts {
  std::string text;
  json data;
};

Facts render_facts(const SceneRecord& r, const Lexicon& lexicon, bool polarization_only) {
  std::vector<std::string> lines;
  json data;
  data["scenario"] = to_string(r.scenario);
  lines.push_back(std::string("scenario: ") + to_string(r.scenario));
  if (r.frame_width > 0 && r.frame_height > 0) {
    lines.push_back("frame: " + std::to_string(r.frame_width) + "x" + std::to_string(r.frame_height));
  }
  const double frame_area = r.frame_width > 0 && r.frame_height > 0
                                ? double(r.frame_width) * double(r.frame_height)
                                : 0.0;

  if (r.scenario == Scenario::transparent) {
    lines.push_back("glass_instance_count: " + std::to_string(r.glass_instances.size()));
    data["instances"] = json::array();
    int k = 1;
    for (const auto& g : r.glass_instances) {
      const double frac = frame_area > 0 ? double(g.area) / frame_area : 0.0;
      lines.push_back("glass_instance " + std::to_string(k++) + ": position=" +
                      physics::to_string(g.position) + "; area_fraction=" + fixed(frac) +
                      "; dolp_mean=" + fixed(g.dolp_mean) + "; dolp_std=" + fixed(g.dolp_std) +
                      "; dolp_p10=" + fixed(g.dolp_p10) + "; dolp_p90=" + fixed(g.dolp_p90));
      data["instances"].push_back({{"position", physics::to_string(g.position)},
                                   {"area_fraction", fixed(frac)},
                                   {"dolp_mean", fixed(g.dolp_mean)}});
    }
  } else {
    const auto& ev = *r.reflection_evidence;
    lines.push_back("reflection_coverage: " + fixed(ev.coverage_fraction));
    lines.push_back("reflection_mean_dolp: " + fixed(ev.mean_dolp_inside));
    lines.push_back("reflection_mean_appearance_difference: " + fixed(ev.mean_rgb_difference_inside));
    const auto spurious = labels_of(r.spurious_set.spurious, lexicon, polarization_only);
    const auto persistent = labels_of(r.spurious_set.persistent, lexicon, polarization_only);
    lines.push_back("reflection_only_objects: " + (spurious.empty() ? std::string("none") : join(spurious)));
    lines.push_back("physically_present_objects: " +
                    (persistent.empty() ? std::string("none") : join(persistent)));
    data["coverage"] = percent(ev.coverage_fraction);
    data["mean_dolp"] = fixed(ev.mean_dolp_inside);
    data["appearance_difference"] = fixed(ev.mean_rgb_difference_inside);
    data["spurious"] = spurious;
    data["persistent"] = persistent;
  }
  if (r.scenario == Scenario::transparent) {
    const auto objects = labels_of(r.detections, lexicon, polarization_only);
    lines.push_back("detected_objects: " + (objects.empty() ? std::string("none") : join(objects)));
    data["objects"] = objects;
  }
  return {join(lines, "\n"), data};
}

}  // namespace

ChatRequest GenerationJob::request() const {
  ChatRequest req;
  req.model = model;
  req.temperature = temperature;
  if (prompt_template && !prompt_template->system.empty()) {
    req.messages.push_back({"system", prompt_template->system});
  }
  req.messages.push_back({"user", prompt});
  req.key = key;
  return req;
}

GenerationJob assemble_prompt(const SceneRecord& record, const PromptTemplate& tmpl,
                              const Lexicon& lexicon, const ClientSettings& settings) {
  record.validate();
  require(tmpl.scenario == record.scenario, ErrorKind::usage,
          "template " + tmpl.id + " is for " + to_string(tmpl.scenario) + " scenes but record " +
              record.scene_id + " is " + to_string(record.scenario));
  const bool counterfactual = tmpl.task && *tmpl.task == Task::counterfactual_reasoning;
  require(!counterfactual || !record.spurious_set.spurious.empty(), ErrorKind::usage,
          "counterfactual template " + tmpl.id + " needs at least one reflection-only object in " +
              record.scene_id);

  GenerationJob job;
  job.scene_id = record.scene_id;
  job.scenario = record.scenario;
  job.key = record.scene_id + "/" + tmpl.id;
  job.prompt_template = &tmpl;
  job.model = settings.model;
  job.temperature = settings.temperature;
  job.retry = settings.retry;
  job.context.template_id = tmpl.id;

  Facts facts = render_facts(record, lexicon, tmpl.polarization_only);
  job.structured_facts = facts.text;

  std::string target;
  if (counterfactual) {
    target = record.spurious_set.spurious.front().label;
    job.context.referenced_object = target;
    facts.data["target"] = target;
  }
  if (tmpl.task && *tmpl.task == Task::glass_counting) {
    job.context.instance_count = int(record.glass_instances.size());
  }

  std::string prompt = tmpl.body;
  prompt = replace_all(prompt, "{{facts}}", job.structured_facts);
  prompt = replace_all(prompt, "{{variant}}", tmpl.variant ? to_string(*tmpl.variant) : "");
  prompt = replace_all(prompt, "{{task}}", tmpl.task ? to_string(*tmpl.task) : "");
  prompt = replace_all(prompt, "{{target}}", target);
  job.prompt = std::move(prompt);
  return job;
}

GenerationJob assemble_prompt(const SceneRecord& record, const TemplateRegistry& registry,
                              std::string_view template_id, const Lexicon& lexicon,
                              const ClientSettings& settings) {
  return assemble_prompt(record, registry.get(template_id), lexicon, settings);
}

namespace {

// Offline clients cannot read the rendered prompt back reliably, so jobs carry
// their facts in request metadata.
ChatRequest request_with_metadata(const GenerationJob& job, const SceneRecord* record,
                                  const Lexicon* lexicon) {
  ChatRequest req = job.request();
  const auto& tmpl = *job.prompt_template;
  req.metadata["kind"] = tmpl.kind == TemplateKind::caption ? "caption" : "instruction";
  if (tmpl.variant) req.metadata["variant"] = to_string(*tmpl.variant);
  if (tmpl.task) req.metadata["task"] = to_string(*tmpl.task);
  if (record && lexicon) {
    Facts facts = render_facts(*record, *lexicon, tmpl.polarization_only);
    if (job.context.referenced_object) facts.data["target"] = *job.context.referenced_object;
    req.metadata["facts"] = facts.data.dump();
  }
  return req;
}

}  // namespace

std::string generate(const GenerationJob& job, ChatClient& client, AttemptLog* log,
                     const Sleeper& sleep) {
  require(job.prompt_template != nullptr, ErrorKind::usage, "generation job without a template");
  return complete_with_retry(client, job.request(), job.retry, log, sleep);
}

// ---- offline client ----

namespace {

std::string stub_caption(const std::string& variant, const json& f) {
  if (f.at("scenario") == "transparent") {
    const auto& inst = f.at("instances");
    const std::size_t n = inst.size();
    if (variant == "geometry") {
      if (n == 0) return "The polarization view shows no transparent surfaces; the degree of polarization stays uniformly low across the frame.";
      return "The polarization view reveals " + std::to_string(n) + " transparent surface" +
             (n == 1 ? "" : "s") + ". The first spans an area fraction of " +
             inst[0].at("area_fraction").get<std::string>() +
             " of the frame with sharply bounded polarization edges.";
    }
    if (variant == "spatial_relationship") {
      if (n == 0) return "No transparent surface occupies any region of the frame, so no spatial layout of glass can be described.";
      std::vector<std::string> where;
      for (const auto& g : inst) where.push_back(g.at("position").get<std::string>());
      return "Transparent surfaces are located at the " + join(where, " and the ") +
             " of the frame, each separated from the surrounding structure by a distinct polarization boundary.";
    }
    if (n == 0) return "The degree of linear polarization shows no localized rise, indicating that the scene holds no transparent surfaces.";
    return "Over the glass the mean degree of linear polarization reaches " +
           inst[0].at("dolp_mean").get<std::string>() +
           ", a response that exposes a surface which intensity alone renders nearly invisible.";
  }
  const auto spurious = f.at("spurious").get<std::vector<std::string>>();
  const auto persistent = f.at("persistent").get<std::vector<std::string>>();
  if (variant == "geometry") {
    return "A specular reflection layer covers about " + f.at("coverage").get<std::string>() +
           " percent of the frame, forming a contiguous region of strongly polarized light.";
  }
  if (variant == "spatial_relationship") {
    std::string s = "Reflected content overlays the scene";
    s += spurious.empty() ? "; no object appears exclusively inside the reflection"
                          : "; " + join(spurious) + " appear only inside the reflection";
    s += persistent.empty() ? "." : " while " + join(persistent) + " remain physically present.";
    return s;
  }
  return "Within the reflection region the mean degree of linear polarization reaches " +
         f.at("mean_dolp").get<std::string>() +
         " and the appearance difference against the reflection-free reference is " +
         f.at("appearance_difference").get<std::string>() + ", confirming a specular layer.";
}

json stub_turns(const std::string& task, const json& f) {
  auto turn = [](std::string q, std::string a) { return json{{"question", q}, {"answer", a}}; };
  json turns = json::array();
  if (f.at("scenario") == "transparent") {
    const auto& inst = f.at("instances");
    const std::size_t n = inst.size();
    std::vector<std::string> where;
    for (const auto& g : inst) where.push_back(g.at("position").get<std::string>());
    if (task == "glass_detection") {
      turns.push_back(turn("Is there any glass in this scene?",
                           n > 0 ? "Yes. Polarization cues reveal transparent glass in the scene."
                                 : "No. The polarization response shows no glass in the scene."));
    } else if (task == "glass_counting") {
      turns.push_back(turn("How many glass instances are in the scene?",
                           "There are " + std::to_string(n) + " glass instances in the scene."));
    } else if (task == "glass_localization") {
      turns.push_back(turn("Where is the glass located?",
                           n > 0 ? "Glass appears at the " + join(where, " and the ") + " of the frame."
                                 : "No glass is present anywhere in the frame."));
    } else {
      turns.push_back(turn("Describe the glass in this scene.",
                           n > 0 ? "The scene holds transparent glass at the " + join(where, " and the ") +
                                       ", with a mean degree of polarization of " +
                                       inst[0].at("dolp_mean").get<std::string>() + " on the first pane."
                                 : "The scene holds no glass surfaces."));
    }
    return turns;
  }
  const auto spurious = f.at("spurious").get<std::vector<std::string>>();
  const auto persistent = f.at("persistent").get<std::vector<std::string>>();
  if (task == "scene_description") {
    turns.push_back(turn("Describe the scene.",
                         "A reflective surface covers about " + f.at("coverage").get<std::string>() +
                             " percent of the view" +
                             (persistent.empty() ? std::string(".")
                                                 : "; the physically present objects are " + join(persistent) + ".")));
  } else if (task == "reflection_recognition") {
    turns.push_back(turn("Which objects are seen only in the reflection?",
                         spurious.empty() ? "No object appears exclusively in the reflection."
                                          : "The " + join(spurious, " and the ") +
                                                " appear only in the reflection layer."));
  } else {
    const std::string target = f.at("target").get<std::string>();
    turns.push_back(turn("Is the " + target + " physically present in the scene?",
                         "No. The " + target + " is not physically present; it is only a reflection "
                                               "revealed by the strongly polarized specular layer."));
  }
  return turns;
}

}  // namespace

std::string StubGenerationClient::complete(const ChatRequest& request) {
  auto meta = [&](const char* k) {
    auto it = request.metadata.find(k);
    require(it != request.metadata.end(), ErrorKind::usage,
            std::string("offline client needs job metadata '") + k + "'");
    return it->second;
  };
  const json facts = json::parse(meta("facts"));
  if (meta("kind") == "caption") return stub_caption(meta("variant"), facts);
  return json{{"turns", stub_turns(meta("task"), facts)}}.dump();
}

// ---- verification ----

bool Verdict::has(std::string_view code) const {
  return std::any_of(reasons.begin(), reasons.end(), [&](const Rejection& r) { return r.code == code; });
}

std::optional<std::vector<Turn>> parse_turns(std::string_view response) {
  json doc;
  try {
    doc = json::parse(response);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (!doc.is_object() || !doc.contains("turns") || !doc["turns"].is_array()) return std::nullopt;
  std::vector<Turn> turns;
  for (const auto& t : doc["turns"]) {
    if (!t.is_object()) return std::nullopt;
    Turn turn;
    if (t.contains("question") && t["question"].is_string()) turn.question = t["question"].get<std::string>();
    if (t.contains("answer") && t["answer"].is_string()) turn.answer = t["answer"].get<std::string>();
    turns.push_back(std::move(turn));
  }
  return turns;
}

namespace {

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

void check_words(std::size_t words, const PromptTemplate& tmpl, Verdict& v) {
  if (words < std::size_t(tmpl.min_words) || words > std::size_t(tmpl.max_words)) {
    v.reasons.push_back({"structural_length", std::to_string(words) + " words outside [" +
                                                  std::to_string(tmpl.min_words) + ", " +
                                                  std::to_string(tmpl.max_words) + "]"});
  }
}

void check_lexicon(std::string_view text, const Lexicon& lexicon, Verdict& v) {
  std::set<std::string> seen;
  for (const auto& hit : lexicon.scan(text)) {
    const std::string code = "lexical_" + hit.category;
    if (seen.insert(code).second) v.reasons.push_back({code, hit.term});
  }
}

bool denies_presence(std::string_view answer) {
  const auto tokens = tokenize_words(answer);
  if (tokens.empty() || tokens.front() == "yes") return false;
  static const std::set<std::string> cues = {"no",      "not",    "never",  "isn't", "doesn't",
                                             "aren't",  "don't",  "cannot", "absent", "nonexistent",
                                             "virtual", "illusory", "nothing"};
  return std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) { return cues.count(t) > 0; });
}

}  // namespace

Verdict verify(std::string_view response, const PromptTemplate& tmpl, const VerificationContext& context,
               const Lexicon& lexicon, const VerificationRules& rules) {
  Verdict v;
  if (tmpl.kind == TemplateKind::caption) {
    const std::string text(response);
    if (rules.check_structure) {
      if (blank(text)) {
        v.reasons.push_back({"structural_empty", "caption is empty"});
      } else {
        check_words(tokenize_words(text).size(), tmpl, v);
      }
    }
    if (rules.check_lexical && tmpl.polarization_only) check_lexicon(text, lexicon, v);
    return v;
  }

  const auto turns = parse_turns(response);
  if (!turns) {
    if (rules.check_structure) v.reasons.push_back({"structural_format", "response is not a turns object"});
    return v;
  }
  bool complete = !turns->empty();
  std::size_t words = 0;
  std::string all_text;
  for (const auto& t : *turns) {
    if (blank(t.question) || blank(t.answer)) complete = false;
    words += tokenize_words(t.answer).size();
    all_text += t.question + "\n" + t.answer + "\n";
  }
  if (rules.check_structure) {
    if (!complete) {
      v.reasons.push_back({"structural_missing_turn", "a turn lacks its question or answer"});
      return v;
    }
    check_words(words, tmpl, v);
  }
  if (rules.check_lexical && tmpl.polarization_only) check_lexicon(all_text, lexicon, v);
  if (turns->empty()) return v;
  const Turn& first = turns->front();

  if (rules.check_numeric && tmpl.task == Task::glass_counting) {
    require(context.instance_count.has_value(), ErrorKind::usage,
            "counting verification needs the record's instance count");
    const auto stated = first_number(first.answer);
    if (!stated) {
      v.reasons.push_back({"numeric_count_missing", "counting answer states no number"});
    } else if (*stated != *context.instance_count) {
      v.reasons.push_back({"numeric_count_mismatch", "stated " + std::to_string(*stated) + ", record has " +
                                                         std::to_string(*context.instance_count)});
    }
  }
  if (rules.check_counterfactual && tmpl.task == Task::counterfactual_reasoning) {
    if (!denies_presence(first.answer)) {
      v.reasons.push_back({"counterfactual_presence_asserted", "answer does not deny physical presence"});
    }
    if (context.referenced_object) {
      const auto target = tokenize_words(*context.referenced_object);
      const auto words_in_turn = tokenize_words(first.question + " " + first.answer);
      if (!target.empty() &&
          std::find(words_in_turn.begin(), words_in_turn.end(), target.back()) == words_in_turn.end()) {
        v.reasons.push_back({"counterfactual_target_missing", "turn does not mention " + *context.referenced_object});
      }
    }
  }
  return v;
}

Verdict reverify(const CaptionSample& sample, const TemplateRegistry& registry, const Lexicon& lexicon) {
  return verify(sample.text, registry.get(sample.context.template_id), sample.context, lexicon);
}

Verdict reverify(const InstructionSample& sample, const TemplateRegistry& registry, const Lexicon& lexicon) {
  json turns = json::array();
  for (const auto& t : sample.turns) turns.push_back({{"question", t.question}, {"answer", t.answer}});
  return verify(json{{"turns", turns}}.dump(), registry.get(sample.context.template_id), sample.context,
                lexicon);
}

// ---- pipeline ----

GenerationOutcome run_generation(const std::vector<SceneRecord>& records, const TemplateRegistry& registry,
                                 const Lexicon& lexicon, ChatClient& client, const PipelineOptions& options,
                                 AttemptLog* log, const Sleeper& sleep) {
  GenerationOutcome outcome;
  struct Pending {
    GenerationJob job;
    const SceneRecord* record;
    ChatRequest request;
  };
  std::vector<Pending> pending;
  for (const auto& record : records) {
    for (const PromptTemplate* tmpl : registry.for_scenario(record.scenario)) {
      if (tmpl->task == Task::counterfactual_reasoning && record.spurious_set.spurious.empty()) {
        outcome.skipped.push_back(record.scene_id + "/" + tmpl->id);
        continue;
      }
      GenerationJob job = assemble_prompt(record, *tmpl, lexicon, options.client);
      ChatRequest req = request_with_metadata(job, &record, &lexicon);
      pending.push_back({std::move(job), &record, std::move(req)});
    }
  }

  std::vector<std::optional<std::string>> responses(pending.size());
  std::vector<std::string> errors(pending.size());
  run_bounded(pending.size(), options.max_in_flight, [&](std::size_t i) {
    try {
      responses[i] = complete_with_retry(client, pending[i].request, pending[i].job.retry, log, sleep);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < pending.size(); ++i) {
    const auto& job = pending[i].job;
    if (!responses[i]) {
      outcome.failed.emplace_back(job.key, errors[i]);
      continue;
    }
    const auto& tmpl = *job.prompt_template;
    Verdict verdict = verify(*responses[i], tmpl, job.context, lexicon, options.rules);
    if (!verdict.accepted()) {
      outcome.rejected.push_back({job.key, *responses[i], std::move(verdict)});
      continue;
    }
    if (tmpl.kind == TemplateKind::caption) {
      outcome.captions.push_back({job.scene_id, job.scenario, *tmpl.variant, *responses[i], Split::unassigned,
                                  job.context});
    } else {
      outcome.instructions.push_back({job.scene_id, job.scenario, *tmpl.task, *parse_turns(*responses[i]),
                                      Split::unassigned, job.context});
    }
  }
  return outcome;
}

}  // namespace polarkit::datagen
