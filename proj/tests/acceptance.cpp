// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "fixtures.hpp"
#include "fusion_fixtures.hpp"
#include "oracles.hpp"
#include "polarkit/coco.hpp"
#include "polarkit/datagen.hpp"
#include "polarkit/encoding.hpp"
#include "polarkit/fusion/analysis.hpp"
#include "polarkit/fusion/train.hpp"
#include "polarkit/judge.hpp"
#include "polarkit/physics.hpp"
#include "polarkit/stokes.hpp"

using namespace polarkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::filesystem::path kData = POLARKIT_TEST_DATA_DIR;

// 1. Malus synthesis at the four canonical angles, then decoding, recovers the
// Stokes triple. Errors are relative to s0 since s1 and s2 may vanish.
Outcome stokes_round_trip() {
  constexpr int n = 10000;
  const Stopwatch clock;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  StokesMap<double> truth{PlaneD(1, n), PlaneD(1, n), PlaneD(1, n)};
  for (int k = 0; k < n; ++k) {
    const double s0 = 1e-3 + 1e3 * u(rng), p = u(rng), theta = std::numbers::pi * u(rng);
    truth.s0(k) = s0;
    truth.s1(k) = s0 * p * std::cos(2 * theta);
    truth.s2(k) = s0 * p * std::sin(2 * theta);
  }
  const auto back = decode_stokes(synthesize_stack(truth));
  const double err = std::max({((back.s0 - truth.s0).abs() / truth.s0).maxCoeff(),
                               ((back.s1 - truth.s1).abs() / truth.s0).maxCoeff(),
                               ((back.s2 - truth.s2).abs() / truth.s0).maxCoeff()});
  const double t = clock.seconds();
  return {err <= 1e-12 && t < 1.0, fmt("max rel err %.3g over %d triples in %.3f s", err, n, t)};
}

// 2. Decoupled angular channels are the normalized linear Stokes components.
Outcome normalized_identity() {
  constexpr int n = 100000;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  StokesMap<double> s{PlaneD(1, n), PlaneD(1, n), PlaneD(1, n)};
  for (int k = 0; k < n; ++k) {
    const double s0 = 1e-2 + 10 * u(rng), p = 1e-4 + (1 - 1e-4) * u(rng), theta = std::numbers::pi * u(rng);
    s.s0(k) = s0;
    s.s1(k) = s0 * p * std::cos(2 * theta);
    s.s2(k) = s0 * p * std::sin(2 * theta);
  }
  const auto polar = compute_polarimetric(s);
  const auto enc = encode(s, polar, EncodingVariant::decoupled);
  const double err = verify_normalized_stokes_identity(s, enc, 0.0);
  return {err <= 1e-9, fmt("max deviation %.3g on %d pixels", err, n)};
}

// 3. Gap across the AoLP wrap: decoupled stays close, raw AoLP jumps by ~pi.
Outcome boundary_continuity() {
  const double a = 0.01, b = std::numbers::pi - 0.01;
  const double dec = boundary_continuity_gap(a, b, EncodingVariant::decoupled);
  const double raw = boundary_continuity_gap(a, b, EncodingVariant::s0_dolp_aolp);
  const double want_dec = 2 * std::sin(0.02), want_raw = std::numbers::pi - 0.02;
  const bool ok = dec <= 0.05 && raw >= 3.0 && std::abs(dec - 0.04) <= 1e-3 && std::abs(raw - 3.1216) <= 1e-3 &&
                  std::abs(dec - want_dec) <= 1e-12 && std::abs(raw - want_raw) <= 1e-12;
  return {ok, fmt("decoupled %.6f, raw aolp %.6f", dec, raw)};
}

// 4. RLE and polygon decoding against brute-force oracles.
Outcome coco_oracles() {
  const Stopwatch clock;
  std::mt19937 rng(4);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 1 + rng() % 32, w = 1 + rng() % 32;
    Mask m(h, w);
    const double p = (rng() % 100) / 100.0;
    for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = (rng() % 1000) < p * 1000;
    const auto counts = coco::encode_rle(m);
    if (!(coco::decode_rle(counts, h, w) == oracle::rle(counts, h, w)).all() || !(oracle::rle(counts, h, w) == m).all()) {
      ++mismatches;
    }
  }
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 1 + rng() % 32, w = 1 + rng() % 32;
    std::vector<coco::PolygonRing> rings(1 + rng() % 3);
    for (auto& ring : rings) {
      const int n = 3 + rng() % 8;
      for (int v = 0; v < n; ++v) {
        // Mix half-pixel grid vertices, which land on centres, with arbitrary ones.
        if (rng() % 2) {
          ring.push_back((rng() % (2 * w + 1)) / 2.0);
          ring.push_back((rng() % (2 * h + 1)) / 2.0);
        } else {
          ring.push_back(w * double(rng()) / rng.max());
          ring.push_back(h * double(rng()) / rng.max());
        }
      }
    }
    if (!(coco::rasterize_polygon(rings, h, w) == oracle::polygon(rings, h, w)).all()) ++mismatches;
  }
  const double t = clock.seconds();
  return {mismatches == 0 && t < 5.0, fmt("%d mismatches in 1000 instances, %.3f s", mismatches, t)};
}

// 5. Raising either threshold never grows the pre-opening prior mask.
Outcome prior_monotonicity() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  int violations = 0, comparisons = 0;
  for (int scene = 0; scene < 100; ++scene) {
    const int h = 4 + rng() % 20, w = 4 + rng() % 20;
    PolarimetricMap<double> polar;
    polar.dolp = PlaneD(h, w);
    polar.aolp = PlaneD::Zero(h, w);
    physics::RgbImage with, without;
    for (int c = 0; c < 3; ++c) {
      with[c] = PlaneD(h, w);
      without[c] = PlaneD(h, w);
    }
    for (Eigen::Index k = 0; k < polar.dolp.size(); ++k) {
      polar.dolp(k) = u(rng);
      for (int c = 0; c < 3; ++c) {
        with[c](k) = u(rng);
        without[c](k) = u(rng);
      }
    }
    for (int step = 0; step < 10; ++step) {
      physics::ReflectionThresholds lo{u(rng), 0.5 * u(rng), 0}, hi = lo;
      (step % 2 ? hi.dolp : hi.rgb) += 0.3 * u(rng);
      const auto a = physics::reflection_prior_mask(polar, with, without, lo);
      const auto b = physics::reflection_prior_mask(polar, with, without, hi);
      ++comparisons;
      if ((b && !a).any()) ++violations;
    }
  }
  return {violations == 0, fmt("%d violations over %d threshold raises in 100 scenes", violations, comparisons)};
}

// 6. Difference sets against exhaustive optimal matching.
Outcome detection_oracle() {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> pos(0, 20), ext(4, 10);
  const char* labels[] = {"cup", "bottle"};
  int bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    physics::DetectionList a, b;
    for (int i = 0, n = rng() % 7; i < n; ++i) a.push_back({labels[rng() % 2], {pos(rng), pos(rng), ext(rng), ext(rng)}, 1});
    for (int i = 0, n = rng() % 7; i < n; ++i) b.push_back({labels[rng() % 2], {pos(rng), pos(rng), ext(rng), ext(rng)}, 1});
    const auto got = physics::diff_detections(a, b);
    const auto want = oracle::exhaustive_matching(a, b, 0.5);
    double total = 0;
    for (const auto& m : got.matches) total += m.iou;
    const bool same_set = std::find(want.optimal_spurious.begin(), want.optimal_spurious.end(), got.spurious_indices) !=
                          want.optimal_spurious.end();
    if (int(got.matches.size()) != want.matches || std::abs(total - want.total_iou) > 1e-9 || !same_set) ++bad;
  }
  return {bad == 0, fmt("%d of 500 cases disagree", bad)};
}

// 7. Exact split sizes and scenario balance on manifests of the published size.
Outcome composition() {
  using datagen::Scenario;
  using datagen::Split;
  const auto caps = fixtures::caption_manifest();
  const auto inst = fixtures::instruction_manifest();
  const auto c = datagen::compose_splits(
      caps, datagen::caption_targets(25200, 3300, {{Scenario::reflection, 18900}, {Scenario::transparent, 9600}}, 0));
  const auto i = datagen::compose_splits(inst, datagen::instruction_targets(41900, 3900, 1000, {}, 0));
  datagen::check_scene_disjoint(caps, c.assignment);
  datagen::check_scene_disjoint(inst, i.assignment);
  std::map<Split, std::int64_t> cn, in;
  for (auto s : c.assignment) ++cn[s];
  for (auto s : i.assignment) ++in[s];
  std::map<Scenario, std::int64_t> scen;
  for (std::size_t k = 0; k < caps.size(); ++k) {
    if (c.assignment[k] != Split::unassigned) ++scen[caps[k].scenario];
  }
  bool test_evaluated = true;
  for (std::size_t k = 0; k < inst.size(); ++k) {
    if (i.assignment[k] == Split::test && !datagen::is_evaluated_task(datagen::parse_task(inst[k].category))) {
      test_evaluated = false;
    }
  }
  const bool ok = caps.size() == 28500 && inst.size() == 46800 && cn[Split::train] == 25200 && cn[Split::val] == 3300 &&
                  in[Split::train] == 41900 && in[Split::val] == 3900 && in[Split::test] == 1000 &&
                  scen[Scenario::reflection] == 18900 && scen[Scenario::transparent] == 9600 && test_evaluated;
  return {ok, fmt("captions %lld/%lld (refl %lld, glass %lld), pairs %lld/%lld/%lld, scene-disjoint",
                  (long long)cn[Split::train], (long long)cn[Split::val], (long long)scen[Scenario::reflection],
                  (long long)scen[Scenario::transparent], (long long)in[Split::train], (long long)in[Split::val],
                  (long long)in[Split::test])};
}

// 8. Adversarial responses rejected with the expected codes, clean ones accepted.
Outcome verification_suite() {
  const auto lexicon = datagen::Lexicon::load(kData / "lexicon_v1.json");
  const auto registry = datagen::TemplateRegistry::load_dir(kData / "templates");
  auto codes = [&](const fixtures::VerifyCase& c) {
    std::set<std::string> out;
    for (const auto& r : datagen::verify(c.response, registry.get(c.template_id), c.context, lexicon).reasons) {
      out.insert(r.code);
    }
    return out;
  };
  int agree = 0, total = 0;
  std::string first_miss;
  for (const auto& c : fixtures::adversarial_cases()) {
    ++total;
    if (codes(c) == c.expected) ++agree;
    else if (first_miss.empty()) first_miss = c.name;
  }
  for (const auto& c : fixtures::clean_cases()) {
    ++total;
    if (codes(c).empty()) ++agree;
    else if (first_miss.empty()) first_miss = c.name;
  }
  return {agree == total && total == 100,
          fmt("%d/%d agree%s%s", agree, total, first_miss.empty() ? "" : ", first miss: ", first_miss.c_str())};
}

// 9. Gradient check, freezing, adapter identity and overfitting.
constexpr int kOverfitSteps = 300;

Outcome fusion_simulator() {
  using namespace fusion;
  const Stopwatch clock;
  std::vector<std::string> failures;

  // (a) Gradient check with informative adapters, 20 coordinates per group.
  double grad_err = 0;
  std::size_t coords = 0;
  for (auto stage : {Stage::stage1, Stage::stage2}) {
    ModelConfig cfg;
    cfg.stage = stage;
    DualStreamModel m(cfg);
    fixtures::wake_adapters(m, 90);
    const auto mask = StageMask::for_stage(stage);
    const auto r = gradient_check(m, fixtures::fusion_batch(cfg, stage, 91), mask, 20, 92);
    grad_err = std::max(grad_err, r.max_relative_error);
    coords += r.entries.size();
    if (r.entries.size() < 20 * mask.trainable.size()) failures.push_back("too few gradient coordinates");
  }
  if (grad_err > 1e-4) failures.push_back("gradient check");

  // (b) Frozen groups stay bitwise identical over 100 steps per stage.
  ModelConfig cfg;
  DualStreamModel model(cfg);
  for (auto stage : {Stage::stage1, Stage::stage2}) {
    model.set_stage(stage);
    const DualStreamModel before = model;
    const auto mask = StageMask::for_stage(stage);
    train(model, {fixtures::fusion_batch(cfg, stage, 93), fixtures::fusion_batch(cfg, stage, 94)}, mask,
          OptimizerConfig::for_stage(stage, 100), 100);
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
      const auto& p = model.parameters()[i];
      const bool same = p.value == before.parameters()[i].value;
      if (same == mask.is_trainable(p.group)) {
        failures.push_back(std::string(to_string(stage)) + " freezing: " + p.name);
        break;
      }
    }
    // (c) On entering stage 2, zero-B adapters leave the stage-1 function unchanged.
    if (stage == Stage::stage1) {
      DualStreamModel next = model;
      next.set_stage(Stage::stage2);
      const auto batch = fixtures::fusion_batch(cfg, Stage::stage2, 95);
      ForwardOptions off;
      off.use_adapters = false;
      const double diff = (forward(next, batch).logits - forward(next, batch, off).logits).cwiseAbs().maxCoeff();
      if (diff > 1e-12) failures.push_back(fmt("adapter identity %.3g", diff));
    }
  }

  // (d) Overfit one 8-token batch in stage 2.
  ModelConfig ocfg;
  ocfg.stage = Stage::stage2;
  DualStreamModel over(ocfg);
  const auto batch = fixtures::fusion_batch(ocfg, Stage::stage2, 96, 3, 5);
  const auto log = train(over, {batch}, StageMask::for_stage(Stage::stage2),
                         OptimizerConfig::for_stage(Stage::stage2, kOverfitSteps), kOverfitSteps);
  const double final_nll = loss(forward(over, batch), batch);
  if (!(final_nll < 0.1)) failures.push_back(fmt("overfit nll %.4f", final_nll));
  // Smoothed trailing window: the last 25 steps average no higher than the 25 before.
  double early = 0, late = 0;
  for (int k = 0; k < 25; ++k) {
    early += log.losses[std::size_t(kOverfitSteps - 50 + k)];
    late += log.losses[std::size_t(kOverfitSteps - 25 + k)];
  }
  if (late > early) failures.push_back("trailing loss window rises");

  const double t = clock.seconds();
  if (t >= 60) failures.push_back("runtime");
  std::string detail = fmt("grad err %.3g on %zu coords; overfit nll %.4f after %d steps; %.2f s", grad_err, coords,
                           final_nll, kOverfitSteps, t);
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

// 10. Uniform attention gives the token-count ratio; real rows sum to one.
Outcome attention_ratio() {
  using namespace fusion;
  const auto even = polarization_attention_ratio(uniform_trace(576, 576, 2, 2, 4, 7));
  const auto skew = polarization_attention_ratio(uniform_trace(4, 12, 2, 2, 4, 7));
  double err = 0;
  for (double r : even) err = std::max(err, std::abs(r - 0.5));
  for (double r : skew) err = std::max(err, std::abs(r - 0.75));
  ModelConfig cfg;
  cfg.stage = Stage::stage2;
  DualStreamModel m(cfg);
  fixtures::wake_adapters(m, 100);
  const auto fwd = forward(m, fixtures::fusion_batch(cfg, Stage::stage2, 101));
  const double rows = max_row_sum_error(fwd.trace);
  bool in_range = true;
  for (double r : polarization_attention_ratio(fwd.trace)) in_range = in_range && r >= 0 && r <= 1;
  return {err <= 1e-12 && rows <= 1e-9 && in_range, fmt("ratio err %.3g, max row-sum err %.3g", err, rows)};
}

// 11. Post-normalization polar token RMS ignores the projector input scale.
Outcome stream_scale() {
  using namespace fusion;
  ModelConfig cfg;
  cfg.stage = Stage::stage2;
  const DualStreamModel m(cfg);
  const auto batch = fixtures::fusion_batch(cfg, Stage::stage2, 110);
  ScaleProbe loud;
  loud.projector_input_scale = 100;
  const auto a = stream_scale_report(m, batch);
  const auto b = stream_scale_report(m, batch, loud);
  const double err = (a.per_token.polar_post_norm_rms - b.per_token.polar_post_norm_rms).cwiseAbs().maxCoeff();
  return {err <= 1e-9 && b.degenerate_tokens == 0,
          fmt("max per-token change %.3g (pre-norm rms %.3g -> %.3g)", err, a.polar_pre_norm_rms, b.polar_pre_norm_rms)};
}

// 12. Weighted overall, uniform-count identity, deterministic stub judging.
Outcome judge_aggregation() {
  using namespace judge;
  auto sample = [](Task t, std::optional<double> score) {
    JudgedSample s;
    s.item.task = t;
    s.final_score = score;
    s.flagged = !score;
    return s;
  };
  // Hand computation: counting {9, 6, 3}, localization {8}, description {5, 7};
  // overall = 38 / 6, flagged samples excluded.
  const std::vector<JudgedSample> fixed{
      sample(Task::glass_counting, 9),      sample(Task::glass_counting, 6),    sample(Task::glass_counting, 3),
      sample(Task::glass_localization, 8),  sample(Task::glass_description, 5), sample(Task::glass_description, 7),
      sample(Task::scene_description, std::nullopt)};
  const auto t = aggregate(fixed);
  const bool hand = t.overall == 38.0 / 6 && t.total == 6 && t.flagged == 1 &&
                    t.tasks.at(Task::glass_counting).mean == 6.0 && t.tasks.at(Task::glass_description).mean == 6.0;

  std::vector<JudgedSample> uniform;
  double means = 0;
  std::mt19937 rng(12);
  for (Task task : kJudgedTasks) {
    double sum = 0;
    for (int k = 0; k < 7; ++k) {
      const double s = 1 + rng() % 10 + (rng() % 3) / 3.0;
      uniform.push_back(sample(task, s));
      sum += s;
    }
    means += sum / 7;
  }
  const double identity = std::abs(aggregate(uniform).overall - means / kJudgedTasks.size());

  const auto prompts = PromptRegistry::load(kData / "judge" / "prompts.json");
  std::vector<EvalItem> items;
  const char* refs[] = {"There are three glass panes.", "The window is in the top left.", "A clear glass door.",
                        "A kitchen with a table.", "Yes, a reflection of a person."};
  const char* preds[] = {"three panes", "top right window", "A clear glass door.", "a table", "no reflection"};
  for (std::size_t k = 0; k < kJudgedTasks.size(); ++k) {
    items.push_back({"i" + std::to_string(k), kJudgedTasks[k], "Question?", refs[k], preds[k]});
  }
  StubJudgeClient client;
  JudgeSettings settings;
  auto no_sleep = [](std::chrono::milliseconds) {};
  const auto run1 = judge_all(items, client, prompts, settings, no_sleep);
  const auto run2 = judge_all(items, client, prompts, settings, no_sleep);
  bool deterministic = true;
  for (std::size_t k = 0; k < items.size(); ++k) deterministic = deterministic && run1[k].scores == run2[k].scores;
  deterministic = deterministic && aggregate(run1).overall == aggregate(run2).overall;

  return {hand && identity <= 1e-12 && deterministic,
          fmt("hand overall %.6f (want %.6f), identity err %.3g, stub %s", t.overall, 38.0 / 6, identity,
              deterministic ? "deterministic" : "NOT deterministic")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"stokes round-trip", stokes_round_trip},
      {"normalized-stokes identity", normalized_identity},
      {"boundary continuity", boundary_continuity},
      {"coco decoding oracles", coco_oracles},
      {"reflection prior monotonicity", prior_monotonicity},
      {"detection difference oracle", detection_oracle},
      {"dataset composition", composition},
      {"verification rules", verification_suite},
      {"fusion simulator", fusion_simulator},
      {"attention ratio", attention_ratio},
      {"stream-scale invariance", stream_scale},
      {"judge aggregation", judge_aggregation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - std::size_t(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
