// Acceptance suite: one PASS / FAIL / SKIP line per criterion.
// Exit status is nonzero iff some criterion FAILs.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "ebr/baselines.hpp"
#include "ebr/cli.hpp"
#include "ebr/evaluation.hpp"
#include "ebr/io.hpp"
#include "ebr/llm_client.hpp"
#include "ebr/manifest.hpp"
#include "ebr/metrics.hpp"
#include "ebr/rescaling.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ebr;
using namespace ebr::testing;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kTauOracleTol = 1e-12;
constexpr double kKappaTol = 1e-9;
constexpr double kRankInvarianceTol = 1e-12;
constexpr auto kOracleBudget = std::chrono::seconds(5);
constexpr auto kFitBudget = std::chrono::seconds(1);

struct Outcome {
  enum class Kind { pass, fail, skip } kind;
  std::string detail;
};

Outcome pass(std::string detail) { return {Outcome::Kind::pass, std::move(detail)}; }
Outcome fail(std::string detail) { return {Outcome::Kind::fail, std::move(detail)}; }
Outcome skip(std::string detail) { return {Outcome::Kind::skip, std::move(detail)}; }

Rubric oracle_rubric(std::int64_t per_sentence = 16) {
  Rubric rubric;
  rubric.aspect_name = "completeness";
  rubric.aspect_definition = "All relevant information from the article is present.";
  rubric.deduction_rules = {{"misses a detail", 10}, {"misses the main point", 50}};
  rubric.per_sentence_deduction = per_sentence;
  return rubric;
}

double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

// 1 ------------------------------------------------------------------------
Outcome tau_oracle() {
  std::mt19937 rng(1);
  const auto start = Clock::now();
  int compared = 0, undefined = 0;
  double worst = 0.0;
  while (compared < 500) {
    const auto n = std::uniform_int_distribution<int>(2, 20)(rng);
    std::uniform_int_distribution<int> value(0, std::uniform_int_distribution<int>(1, 5)(rng));
    metrics::PairedScores p;
    for (int i = 0; i < n; ++i) p.add(value(rng), value(rng));
    // force at least one tie on each side
    if (n >= 3) {
      p.x[1] = p.x[0];
      p.y[2] = p.y[0];
    }
    const auto expected = oracle::try_brute_force_tau_b(p.x, p.y);
    const auto got = metrics::try_kendall_tau_b(p);
    if (expected.has_value() != got.has_value()) return fail(fmt::format("definedness differs at n={}", n));
    if (!got) {
      ++undefined;
      continue;
    }
    worst = std::max(worst, std::abs(got->tau - *expected));
    ++compared;
  }
  const auto elapsed = Clock::now() - start;
  const auto detail = fmt::format("{} tied vectors, max |diff| {:.1e} (tol {:.0e}), {} undefined agreed, {:.3f}s",
                                  compared, worst, kTauOracleTol, undefined, seconds(elapsed));
  if (worst > kTauOracleTol || elapsed > kOracleBudget) return fail(detail);
  return pass(detail);
}

// 2 ------------------------------------------------------------------------
Outcome kappa() {
  metrics::RatingMatrix unanimous;
  for (int i = 0; i < 10; ++i) unanimous.counts.push_back(i % 3 ? std::vector<int>{5, 0} : std::vector<int>{0, 5});
  const double u = metrics::fleiss_kappa(unanimous);
  // [[1,1],[1,1]]: P-bar = 0, Pe = 0.5 -> -1.  [[3,0],[2,1],[0,3]]: (7/9 - 41/81) / (40/81) = 0.55.
  const double split = metrics::fleiss_kappa({{{1, 1}, {1, 1}}});
  const double mixed = metrics::fleiss_kappa({{{3, 0}, {2, 1}, {0, 3}}});
  const auto detail = fmt::format("unanimous {}, split {:.12f} (hand -1), mixed {:.12f} (hand 0.55)", u, split, mixed);
  if (u != 1.0 || std::abs(split + 1.0) > kKappaTol || std::abs(mixed - 0.55) > kKappaTol) return fail(detail);
  return pass(detail);
}

// 3 ------------------------------------------------------------------------
Outcome baseline_exactness() {
  const std::array<double, 4> expected{0, 30, 70, 100};
  for (auto label : kAllLabels) {
    if (baselines::static_rescale(label) != expected[static_cast<std::size_t>(label_rank(label))]) {
      return fail(fmt::format("static {} -> {}", to_string(label), baselines::static_rescale(label)));
    }
  }
  for (std::size_t m = 0; m <= 10; ++m) {
    const double want = std::clamp(100.0 - 16.0 * static_cast<double>(m), 0.0, 100.0);
    if (baselines::msh_score(m, 16) != want) return fail(fmt::format("msh m={} -> {}", m, baselines::msh_score(m, 16)));
  }
  return pass("static {100,70,30,0} and msh(m,16) for m in 0..10 exact");
}

// 4 ------------------------------------------------------------------------
Outcome planted_recovery() {
  std::string detail;
  bool ok = true;
  for (std::int64_t planted : {5, 16, 25}) {
    std::mt19937 rng(static_cast<unsigned>(planted) * 7919u);
    std::vector<Judgment> judgments;
    std::vector<ReferenceScore> references;
    for (int i = 0; i < 200; ++i) {
      const auto count = std::uniform_int_distribution<std::size_t>(0, 10)(rng);
      auto j = make_judgment("q" + std::to_string(i), "w" + std::to_string(i % 5), LikertLabel::missing_major,
                             first_k_sentences(count));
      references.push_back({j.key(), {static_cast<std::int64_t>(baselines::msh_score(j, planted))}});
      judgments.push_back(std::move(j));
    }
    const auto start = Clock::now();
    const auto fit = baselines::optimize_msh_deduction(judgments, references);
    const auto elapsed = Clock::now() - start;
    ok = ok && fit.deduction == planted && fit.mae == 0.0 && elapsed < kFitBudget;
    detail += fmt::format("{}d*={} -> {} (MAE {}, {:.4f}s)", detail.empty() ? "" : "; ", planted, fit.deduction,
                          fit.mae, seconds(elapsed));
  }
  return ok ? pass(detail) : fail(detail);
}

// 5 ------------------------------------------------------------------------
std::string slurp(const fs::path& path) { return fs::exists(path) ? io::read_text_file(path) : std::string(); }

Outcome end_to_end_determinism() {
  TempDir dir("ebr-accept5");
  auto d = synthetic_dataset(30, {"w1", "w2", "w3"}, 5);
  io::save_dataset(d, dir / "data");
  io::save_rubric(oracle_rubric(), dir / "rubric.json");
  const auto out = dir / "scores.jsonl";
  const std::string command =
      fmt::format("'{}' --data-dir '{}' --quiet rescale --rubric '{}' --backend oracle --concurrency 4 --out '{}'",
                  EBR_CLI_PATH, (dir / "data").string(), (dir / "rubric.json").string(), out.string());
  if (std::system(command.c_str()) != 0) return fail("first run failed: " + command);
  const auto scores = slurp(out);
  const auto manifest = slurp(manifest_path_for(out));
  if (std::system(command.c_str()) != 0) return fail("second run failed");
  const bool same = scores == slurp(out) && manifest == slurp(manifest_path_for(out));
  const auto detail = fmt::format("two CLI runs, {} score bytes, {} manifest bytes, identical={}", scores.size(),
                                  manifest.size(), same);
  if (!same || scores.empty() || manifest.empty()) return fail(detail);
  return pass(detail);
}

// 6 ------------------------------------------------------------------------
Outcome rank_invariance() {
  const std::vector<std::string> annotators{"w1", "w2", "w3", "w4", "w5"};
  const auto bundle = DatasetBundle::create(synthetic_dataset(40, annotators, 6));
  const auto labels = evaluation::label_scores(bundle.judgments());
  std::mt19937 rng(66);
  double worst = 0.0;
  double pre = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, std::array<double, 4>> maps;
    for (const auto& a : annotators) {
      std::array<double, 4> m{};
      double v = std::uniform_real_distribution<double>(-100, 100)(rng);
      for (auto& x : m) {
        x = v;
        v += std::uniform_real_distribution<double>(1e-3, 50)(rng);
      }
      maps[a] = m;
    }
    std::vector<ScoredJudgment> rescaled;
    for (const auto& j : bundle.judgments()) {
      rescaled.push_back({j.key(), maps[j.annotator_id][static_cast<std::size_t>(label_rank(j.label))],
                          ScoringMethod::ebr, "monotone-map", "t", std::nullopt});
    }
    const auto shift = evaluation::agreement_shift(labels, evaluation::method_scores(rescaled));
    worst = std::max(worst, std::abs(shift.pre.aggregate - shift.post.aggregate));
    pre = shift.pre.aggregate;
  }
  const auto detail = fmt::format("20 random monotone maps, pre {:.6f}, max |pre-post| {:.1e} (tol {:.0e})", pre, worst,
                                  kRankInvarianceTol);
  return worst <= kRankInvarianceTol ? pass(detail) : fail(detail);
}

// 7 ------------------------------------------------------------------------
Outcome label_ordering() {
  const auto bundle = DatasetBundle::create(synthetic_dataset(100, {"w1", "w2", "w3"}, 7));
  const auto rubric = oracle_rubric();
  RubricOracleBackend backend;
  std::string detail;
  bool ok = true;
  for (bool extremes : {false, true}) {
    RescaleRequest request{rubric, PromptVariant::with_rubric, {}, "order"};
    request.policy.rescale_extremes = extremes;
    const auto result = rescale_bundle(backend, bundle, request);
    const auto averages = evaluation::avg_score_per_label(result.scores, bundle);
    bool strict = averages.rows.size() == 4;
    for (std::size_t k = 1; strict && k < averages.rows.size(); ++k) {
      strict = averages.rows[k - 1].mean < averages.rows[k].mean;
    }
    ok = ok && strict && averages.order_violations.empty();
    detail += fmt::format("{}{}:", detail.empty() ? "" : "; ", extremes ? "all labels rescaled" : "default policy");
    for (const auto& row : averages.rows) detail += fmt::format(" {:.1f}", row.mean);
  }
  return ok ? pass(detail) : fail(detail);
}

// 8 ------------------------------------------------------------------------
Outcome cache_contract() {
  TempDir dir("ebr-accept8");
  io::save_dataset(synthetic_dataset(20, {"w1", "w2", "w3"}, 8), dir / "data");
  io::save_rubric(oracle_rubric(), dir / "rubric.json");
  FakeChatServer server;
  server.set_latency(std::chrono::milliseconds(15));
  EnvGuard key("EBR_ACCEPT_KEY", "test");
  constexpr int kConcurrency = 3;
  auto run = [&](const std::string& name) {
    std::ostringstream out, err;
    return cli::run({"--data-dir", (dir / "data").string(), "--quiet", "rescale", "--rubric",
                     (dir / "rubric.json").string(), "--backend", "live", "--base-url", server.base_url(),
                     "--api-key-env", "EBR_ACCEPT_KEY", "--cache-dir", (dir / "cache").string(), "--concurrency",
                     std::to_string(kConcurrency), "--backoff-ms", "10", "--out", (dir / name).string()},
                    out, err);
  };
  if (run("cold.jsonl") != cli::kSuccess) return fail("cold run failed");
  const int cold = server.requests();
  if (run("warm.jsonl") != cli::kSuccess) return fail("warm run failed");
  const int warm = server.requests() - cold;
  auto strip = [](std::vector<ScoredJudgment> scores) {
    std::vector<std::pair<JudgmentKey, double>> out;
    for (const auto& s : scores) out.emplace_back(s.key, s.score);
    return out;
  };
  const bool same = strip(io::load_scores(dir / "cold.jsonl")) == strip(io::load_scores(dir / "warm.jsonl"));
  const auto detail = fmt::format("cold {} request(s), warm {} request(s), identical scores={}, max in flight {} (limit {})",
                                  cold, warm, same, server.max_in_flight(), kConcurrency);
  if (cold == 0 || warm != 0 || !same || server.max_in_flight() > kConcurrency) return fail(detail);
  return pass(detail);
}

// 9 ------------------------------------------------------------------------
struct Check {
  std::string name;
  double got;
  double want;
  double tol;
  bool ok() const { return std::abs(got - want) <= tol; }
};

Outcome release_reproductions() {
  const char* dir = std::getenv("EBR_RELEASE_DIR");
  if (!dir) return skip("set EBR_RELEASE_DIR to a dataset directory converted from the public release");
  const auto bundle = io::load_bundle(dir);
  std::vector<Check> checks;
  std::vector<std::string> skipped;

  const auto overall = metrics::label_distribution(bundle.judgments(), metrics::GroupBy::overall);
  const std::array<double, 4> table{18, 4, 11, 67};
  for (auto label : kAllLabels) {
    const auto k = static_cast<std::size_t>(label_rank(label));
    checks.push_back({fmt::format("overall % {}", to_string(label)), overall.at(0).percent[k], table[k], 1.0});
  }

  std::map<std::string, std::vector<int>> rows;
  for (const auto& j : bundle.judgments()) {
    auto& row = rows[j.item_id];
    row.resize(2);
    row[static_cast<std::size_t>(metrics::collapse_binary(j.label))] += 1;
  }
  std::map<int, int> raters;
  for (const auto& [item, row] : rows) raters[row[0] + row[1]] += 1;
  const int modal = std::max_element(raters.begin(), raters.end(), [](auto a, auto b) { return a.second < b.second; })->first;
  metrics::RatingMatrix matrix;
  for (const auto& [item, row] : rows) {
    if (row[0] + row[1] == modal) matrix.counts.push_back(row);
  }
  checks.push_back({"binary Fleiss kappa", metrics::fleiss_kappa(matrix), 0.328, 0.005});
  checks.push_back({"aggregate tau, original labels",
                    metrics::pairwise_aggregate_tau(evaluation::label_scores(bundle.judgments())).aggregate, 0.33, 0.01});

  if (const char* ebr = std::getenv("EBR_RELEASE_EBR_SCORES")) {
    const auto fit = baselines::fit_avg_ebr_mapping(io::load_scores(ebr), bundle);
    const std::array<double, 4> published{0.0, 50.8, 78.6, 99.3};
    for (std::size_t k = 0; k < 4; ++k) {
      checks.push_back({fmt::format("Avg-EBR {}", to_string(kAllLabels[k])), fit.means[k], published[k], 0.5});
    }
  } else {
    skipped.push_back("Avg-EBR mapping (set EBR_RELEASE_EBR_SCORES)");
  }

  if (bundle.references() && !bundle.references()->empty() && bundle.references()->front().expert_scores.size() >= 2) {
    const std::vector<evaluation::Slice> slices{evaluation::Slice::overall()};
    const auto pairs = evaluation::expert_agreement(bundle, slices);
    const auto& first = pairs.front().slices.front();
    checks.push_back({"expert (1,2) overall tau", first.tau ? first.tau->tau : NAN, 0.82, 0.02});
    checks.push_back({"expert (1,2) overall MAE", first.mae, 8.86, 0.5});
  } else {
    skipped.push_back("expert pair (1,2) (release has no per-expert scores)");
  }

  std::string detail;
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.ok();
    detail += fmt::format("{}{} {:.3f} vs {} ±{}{}", detail.empty() ? "" : "; ", c.name, c.got, c.want, c.tol,
                          c.ok() ? "" : " MISMATCH");
  }
  for (const auto& s : skipped) detail += "; skipped " + s;
  return ok ? pass(detail) : fail(detail);
}

// 10 -----------------------------------------------------------------------
Outcome live_backend() {
  const char* base_url = std::getenv("EBR_LIVE_BASE_URL");
  const char* data = std::getenv("EBR_LIVE_DATA_DIR");
  if (!base_url || !data) {
    return skip("optional; set EBR_LIVE_BASE_URL, EBR_LIVE_DATA_DIR (>= 20 referenced instances), EBR_LIVE_MODEL, "
                "and the API key variable named by EBR_LIVE_KEY_ENV (default OPENAI_API_KEY)");
  }
  const auto bundle = io::load_bundle(data);
  if (!bundle.references() || bundle.references()->size() < 20) return fail("fewer than 20 reference scores in " + std::string(data));

  BackendConfig config;
  config.base_url = base_url;
  if (const char* model = std::getenv("EBR_LIVE_MODEL")) config.model_name = model;
  if (const char* env = std::getenv("EBR_LIVE_KEY_ENV")) config.api_key_env = env;
  config.temperature = 0.0;
  TempDir cache("ebr-accept10");
  config.cache_dir = cache.path();
  auto client = std::make_shared<ChatClient>(config);

  std::vector<Judgment> subsample;
  for (const auto& r : *bundle.references()) subsample.push_back(*bundle.find_judgment(r.key));
  const auto rubric = oracle_rubric();
  LiveBackend backend(client);
  const auto result = rescale_judgments(backend, bundle, subsample, {rubric, PromptVariant::with_rubric, {}, "live"}, 4);
  bool in_range = true;
  for (const auto& s : result.scores) in_range = in_range && s.score >= 0 && s.score <= 100;

  evaluation::BackendFactory factory = [&](const std::string& run_id) -> std::unique_ptr<ScoringBackend> {
    return std::make_unique<LiveBackend>(client, CacheMode::bypass, cache.path() / "runs" / run_id);
  };
  const auto report = evaluation::stability_run(factory, bundle, {rubric, PromptVariant::with_rubric, {}, "live"}, 2, 4);
  bool shaped = report.runs.size() == 2;
  for (const auto& row : report.runs) shaped = shaped && row.tau.has_value() && row.scored > 0;

  const auto detail = fmt::format("{} instances, {} parse failure(s), in range={}, stability rows={}", subsample.size(),
                                  result.failures.size(), in_range, report.runs.size());
  return result.ok() && in_range && shaped ? pass(detail) : fail(detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 metric oracle equivalence", tau_oracle},
      {"2 fleiss kappa", kappa},
      {"3 baseline exactness", baseline_exactness},
      {"4 planted-parameter recovery", planted_recovery},
      {"5 end-to-end determinism", end_to_end_determinism},
      {"6 rank invariance", rank_invariance},
      {"7 label ordering", label_ordering},
      {"8 cache contract", cache_contract},
      {"9 dataset reproductions", release_reproductions},
      {"10 live backend", live_backend},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = fail(std::string("exception: ") + e.what());
    }
    const char* tag = outcome.kind == Outcome::Kind::pass ? "PASS" : outcome.kind == Outcome::Kind::fail ? "FAIL" : "SKIP";
    if (outcome.kind == Outcome::Kind::fail) ++failures;
    std::cout << tag << " [" << name << "] " << outcome.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
