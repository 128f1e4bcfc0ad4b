// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>
#include <set>

#include "polarkit/datagen.hpp"
#include "polarkit/errors.hpp"

namespace polarkit::datagen {

using json = nlohmann::json;

CompositionTargets caption_targets(std::int64_t train, std::int64_t val,
                                   std::map<Scenario, std::int64_t> scenario_totals, std::uint64_t seed) {
  CompositionTargets t;
  t.splits = {{Split::train, train, {}}, {Split::val, val, {}}};
  t.scenario_totals = std::move(scenario_totals);
  t.seed = seed;
  return t;
}

CompositionTargets instruction_targets(std::int64_t train, std::int64_t val, std::int64_t test,
                                       std::map<Scenario, std::int64_t> scenario_totals, std::uint64_t seed) {
  std::vector<std::string> evaluated;
  for (Task task : {Task::glass_detection, Task::glass_counting, Task::glass_localization,
                    Task::glass_description, Task::scene_description, Task::reflection_recognition,
                    Task::counterfactual_reasoning}) {
    if (is_evaluated_task(task)) evaluated.emplace_back(to_string(task));
  }
  CompositionTargets t;
  t.splits = {{Split::train, train, {}}, {Split::val, val, {}}, {Split::test, test, evaluated}};
  t.scenario_totals = std::move(scenario_totals);
  t.seed = seed;
  return t;
}

json CompositionReport::to_json() const {
  return {{"split_totals", split_totals}, {"scenario_totals", scenario_totals}, {"cells", cells},
          {"unassigned", unassigned},     {"scenes", scenes},                   {"seed", seed}};
}

void check_scene_disjoint(const std::vector<ComposeItem>& items, const std::vector<Split>& assignment) {
  require(items.size() == assignment.size(), ErrorKind::usage, "assignment does not match the item list");
  std::map<std::string, Split> owner;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (assignment[i] == Split::unassigned) continue;
    auto [it, fresh] = owner.emplace(items[i].scene_id, assignment[i]);
    require(fresh || it->second == assignment[i], ErrorKind::composition,
            "scene " + items[i].scene_id + " spans splits " + to_string(it->second) + " and " +
                to_string(assignment[i]));
  }
}

namespace {

struct SceneGroup {
  std::string id;
  std::vector<std::size_t> items;
};

}  // namespace

// Splits are filled one at a time, restricted splits first and the largest
// last. Each split first takes whole scenes that fit, then tops up from
// partially admissible scenes; items a chosen scene cannot place stay
// unassigned, which keeps every scene inside a single split.
Composition compose_splits(const std::vector<ComposeItem>& items, const CompositionTargets& targets) {
  std::map<std::string, SceneGroup> by_id;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& g = by_id[items[i].scene_id];
    g.id = items[i].scene_id;
    g.items.push_back(i);
  }
  std::vector<SceneGroup> scenes;
  for (auto& [id, g] : by_id) scenes.push_back(std::move(g));
  std::mt19937_64 rng(targets.seed);
  for (std::size_t i = scenes.size(); i > 1; --i) std::swap(scenes[i - 1], scenes[rng() % i]);

  std::map<Scenario, std::int64_t> quota = targets.scenario_totals;
  const bool balanced = !quota.empty();
  auto scenario_room = [&](Scenario s) {
    if (!balanced) return std::numeric_limits<std::int64_t>::max();
    auto it = quota.find(s);
    return it == quota.end() ? std::int64_t{0} : it->second;
  };

  std::vector<std::size_t> order(targets.splits.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = targets.splits[a];
    const auto& sb = targets.splits[b];
    if (sa.allowed_categories.empty() != sb.allowed_categories.empty()) return !sa.allowed_categories.empty();
    return sa.count < sb.count;
  });

  Composition out;
  out.assignment.assign(items.size(), Split::unassigned);
  std::vector<bool> used(scenes.size(), false);
  std::map<std::string, std::int64_t> shortfall;

  for (std::size_t k : order) {
    const SplitTarget& target = targets.splits[k];
    const std::set<std::string> allowed(target.allowed_categories.begin(), target.allowed_categories.end());
    auto admissible = [&](std::size_t i) { return allowed.empty() || allowed.count(items[i].category) > 0; };
    std::int64_t remaining = target.count;

    auto take = [&](std::size_t s, bool whole_only) {
      std::map<Scenario, std::int64_t> need;
      std::int64_t n = 0;
      for (std::size_t i : scenes[s].items) {
        if (admissible(i)) {
          ++need[items[i].scenario];
          ++n;
        } else if (whole_only) {
          return;
        }
      }
      if (n == 0) return;
      if (whole_only) {
        if (n > remaining) return;
        for (const auto& [sc, c] : need) {
          if (c > scenario_room(sc)) return;
        }
      }
      std::int64_t taken = 0;
      for (std::size_t i : scenes[s].items) {
        if (remaining == 0) break;
        if (!admissible(i) || scenario_room(items[i].scenario) == 0) continue;
        out.assignment[i] = target.split;
        if (balanced) --quota[items[i].scenario];
        --remaining;
        ++taken;
      }
      if (taken > 0) used[s] = true;
    };

    for (int pass = 0; pass < 2 && remaining > 0; ++pass) {
      for (std::size_t s = 0; s < scenes.size() && remaining > 0; ++s) {
        if (!used[s]) take(s, pass == 0);
      }
    }
    if (remaining > 0) shortfall[std::string("split ") + to_string(target.split)] = remaining;
  }
  for (const auto& [sc, left] : quota) {
    if (left > 0) shortfall[std::string("scenario ") + to_string(sc)] = left;
  }
  if (!shortfall.empty()) {
    std::string msg = "infeasible composition targets; shortfall:";
    for (const auto& [cell, n] : shortfall) msg += " " + cell + "=" + std::to_string(n);
    fail(ErrorKind::composition, msg);
  }
  check_scene_disjoint(items, out.assignment);

  CompositionReport& r = out.report;
  r.seed = targets.seed;
  std::set<std::string> assigned_scenes;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (out.assignment[i] == Split::unassigned) {
      ++r.unassigned;
      continue;
    }
    const std::string split = to_string(out.assignment[i]);
    const std::string scenario = to_string(items[i].scenario);
    ++r.split_totals[split];
    ++r.scenario_totals[scenario];
    ++r.cells[split][scenario][items[i].category];
    assigned_scenes.insert(items[i].scene_id);
  }
  r.scenes = std::int64_t(assigned_scenes.size());
  return out;
}

}  // namespace polarkit::datagen
