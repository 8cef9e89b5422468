#include "ebr/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ebr/baselines.hpp"
#include "ebr/evaluation.hpp"
#include "ebr/hashing.hpp"
#include "ebr/io.hpp"
#include "ebr/llm_client.hpp"
#include "ebr/manifest.hpp"
#include "ebr/metrics.hpp"
#include "ebr/rescaling.hpp"

namespace ebr::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOptions {
  std::string data_dir = ".";
  bool quiet = false;
  bool json = false;
};

struct LiveOptions {
  std::string base_url = BackendConfig{}.base_url;
  std::string model = BackendConfig{}.model_name;
  double temperature = 0.0;
  std::int64_t max_tokens = BackendConfig{}.max_response_tokens;
  std::int64_t timeout_ms = 60'000;
  int max_retries = BackendConfig{}.max_retries;
  std::int64_t backoff_ms = 1'000;
  std::string cache_dir = ".ebr-cache";
  std::string api_key_env = "OPENAI_API_KEY";

  BackendConfig config(std::size_t concurrency) const {
    BackendConfig c;
    c.base_url = base_url;
    c.model_name = model;
    c.temperature = temperature;
    c.max_response_tokens = max_tokens;
    c.timeout = std::chrono::milliseconds(timeout_ms);
    c.max_retries = max_retries;
    c.backoff_base = std::chrono::milliseconds(backoff_ms);
    c.concurrency_limit = concurrency;
    c.cache_dir = cache_dir;
    c.api_key_env = api_key_env;
    return c;
  }
};

void add_live_options(CLI::App* cmd, LiveOptions& live) {
  cmd->add_option("--base-url", live.base_url, "chat-completions base URL")->capture_default_str();
  cmd->add_option("--model", live.model, "model name")->capture_default_str();
  cmd->add_option("--temperature", live.temperature, "sampling temperature")->capture_default_str();
  cmd->add_option("--max-tokens", live.max_tokens, "max response tokens")->capture_default_str();
  cmd->add_option("--timeout-ms", live.timeout_ms, "per-request timeout")->capture_default_str();
  cmd->add_option("--max-retries", live.max_retries, "retries on transient failures")->capture_default_str();
  cmd->add_option("--backoff-ms", live.backoff_ms, "initial retry backoff")->capture_default_str();
  cmd->add_option("--cache-dir", live.cache_dir, "response cache directory")->capture_default_str();
  cmd->add_option("--api-key-env", live.api_key_env, "environment variable with the API key")->capture_default_str();
}

struct RescaleOptions {
  std::string rubric;
  std::string backend = "oracle";
  std::string variant = "with_rubric";
  bool rescale_extremes = false;
  std::int64_t complete_score = 100;
  std::int64_t missing_all_score = 0;
  std::int64_t quantize = 0;
  std::size_t concurrency = 1;
  std::string run_id;
  std::string templates_dir;
  std::string label_definitions;
  LiveOptions live;
};

void add_rescale_options(CLI::App* cmd, RescaleOptions& o) {
  cmd->add_option("--rubric", o.rubric, "rubric file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--backend", o.backend, "scoring backend")->check(CLI::IsMember({"oracle", "live"}))->capture_default_str();
  cmd->add_option("--variant", o.variant, "prompt variant")
      ->check(CLI::IsMember({"with_rubric", "without_rubric"}))
      ->capture_default_str();
  cmd->add_flag("--rescale-extremes", o.rescale_extremes, "also send complete / missing_all judgments to the backend");
  cmd->add_option("--complete-score", o.complete_score, "fixed score for complete")->capture_default_str();
  cmd->add_option("--missing-all-score", o.missing_all_score, "fixed score for missing_all")->capture_default_str();
  cmd->add_option("--quantize", o.quantize, "round backend scores to multiples of N")->check(CLI::PositiveNumber);
  cmd->add_option("--concurrency", o.concurrency, "backend calls in flight")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--run-id", o.run_id, "run id (default: hash of the manifest)");
  cmd->add_option("--templates", o.templates_dir, "directory with with_rubric.txt / without_rubric.txt")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--label-definitions", o.label_definitions, "label definition table (JSON)")->check(CLI::ExistingFile);
  add_live_options(cmd, o.live);
}

RescalePolicy policy_of(const RescaleOptions& o) {
  RescalePolicy policy;
  policy.rescale_extremes = o.rescale_extremes;
  policy.complete_score = o.complete_score;
  policy.missing_all_score = o.missing_all_score;
  if (o.quantize > 0) policy.quantize_to = o.quantize;
  return policy;
}

PromptConfig prompts_of(const RescaleOptions& o) {
  PromptConfig prompts;
  if (!o.templates_dir.empty()) prompts.templates = PromptTemplates::load(o.templates_dir);
  if (!o.label_definitions.empty()) prompts.labels = LabelDefinitions::load(o.label_definitions);
  return prompts;
}

ordered_json policy_json(const RescalePolicy& policy) {
  ordered_json out;
  out["rescale_extremes"] = policy.rescale_extremes;
  out["complete_score"] = policy.complete_score;
  out["missing_all_score"] = policy.missing_all_score;
  out["quantize_to"] = policy.quantize_to ? ordered_json(*policy.quantize_to) : ordered_json(nullptr);
  return out;
}

/// Manifest config shared by rescale and stability.
ordered_json rescale_config_json(const RescaleOptions& o, const PromptConfig& prompts, PromptVariant variant) {
  ordered_json config;
  config["variant"] = to_string(variant);
  config["policy"] = policy_json(policy_of(o));
  config["rubric_sha256"] = sha256_file(o.rubric);
  config["template_sha256"] = sha256_hex(prompts.templates[variant]);
  std::string labels;
  for (auto label : kAllLabels) labels += prompts.labels[label] + "\n";
  config["label_definitions_sha256"] = sha256_hex(labels);
  config["concurrency"] = o.concurrency;
  if (o.backend == "live") {
    config["model"] = o.live.model;
    config["temperature"] = o.live.temperature;
    config["max_tokens"] = o.live.max_tokens;
    config["base_url"] = o.live.base_url;
  }
  return config;
}

void print_records(std::ostream& out, const std::vector<ordered_json>& records) {
  for (const auto& record : records) out << record.dump() << "\n";
}

void write_records(const fs::path& path, const std::vector<ordered_json>& records) {
  std::string text;
  for (const auto& record : records) text += record.dump() + "\n";
  io::write_text_file(path, text);
}

void write_failures(const fs::path& output, const std::vector<FailedJudgment>& failures) {
  fs::path sidecar = output;
  sidecar += ".failures.jsonl";
  if (failures.empty()) {
    std::error_code ec;
    fs::remove(sidecar, ec);
    return;
  }
  std::vector<ordered_json> records;
  for (const auto& failure : failures) {
    ordered_json record;
    record["item_id"] = failure.key.item_id;
    record["annotator"] = failure.key.annotator;
    record["reason"] = failure.reason;
    if (failure.raw_response) record["raw_response"] = *failure.raw_response;
    records.push_back(std::move(record));
  }
  write_records(sidecar, records);
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    auto part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!part.empty()) out.push_back(part);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::string describe(const ValidationIssue& issue) {
  return fmt::format("{}: {}: {}", issue.severity == Severity::error ? "error" : "warning", issue.location, issue.message);
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const GlobalOptions& g, bool strict, std::ostream& out) {
  const auto dataset = io::read_dataset(g.data_dir);
  const auto report = validate_dataset(dataset);
  if (g.json) {
    for (const auto& issue : report.issues) {
      ordered_json record;
      record["severity"] = issue.severity == Severity::error ? "error" : "warning";
      record["location"] = issue.location;
      record["message"] = issue.message;
      out << record.dump() << "\n";
    }
  } else {
    for (const auto& issue : report.issues) out << describe(issue) << "\n";
    if (!g.quiet) {
      out << fmt::format("{} document(s), {} item(s), {} judgment(s): {} error(s), {} warning(s)\n",
                         dataset.documents.size(), dataset.items.size(), dataset.judgments.size(), report.error_count(),
                         report.warning_count());
    }
  }
  const bool accepted = strict ? report.accepted_strict() : report.accepted();
  return accepted ? kSuccess : kFailure;
}

// ---------------------------------------------------------------------------
// rescale

int cmd_rescale(const GlobalOptions& g, const RescaleOptions& o, const std::string& output,
                const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto bundle = io::load_bundle(g.data_dir);
  const auto rubric = io::load_rubric(o.rubric);
  const auto prompts = prompts_of(o);
  const auto variant = parse_variant(o.variant);
  const auto policy = policy_of(o);

  std::unique_ptr<ScoringBackend> backend;
  std::shared_ptr<ChatClient> client;
  if (o.backend == "live") {
    client = std::make_shared<ChatClient>(o.live.config(o.concurrency));
    backend = std::make_unique<LiveBackend>(client);
  } else {
    backend = std::make_unique<RubricOracleBackend>();
  }

  RunManifest manifest;
  manifest.command_line = args;
  manifest.backend_id = backend->id();
  manifest.config = rescale_config_json(o, prompts, variant);
  hash_dataset_inputs(manifest, g.data_dir);
  hash_input(manifest, o.rubric);
  manifest.run_id = o.run_id.empty() ? manifest.content_id() : o.run_id;

  RescaleRequest request{rubric, variant, policy, manifest.run_id, &prompts};
  const auto result = rescale_bundle(*backend, bundle, request, o.concurrency);

  io::save_scores(result.scores, output);
  write_failures(output, result.failures);
  write_manifest(manifest, output);

  if (client) {
    const auto stats = cache_stats(client->cache());
    client->cache().persist_session_counts();
    if (!g.quiet) {
      err << fmt::format("cache: {} entries, {} hits, {} misses this session; {} request(s) sent\n", stats.entries,
                         client->cache().session_hits(), client->cache().session_misses(), client->requests_sent());
      if (o.live.temperature == 0.0) err << "note: live backend used at temperature 0 (toolkit default)\n";
    }
  }
  if (!g.quiet) {
    err << fmt::format("run {}: scored {} of {} judgment(s), {} failure(s)\n", manifest.run_id, result.scores.size(),
                       bundle.judgments().size(), result.failures.size());
    for (const auto& failure : result.failures) err << "  failed " << to_string(failure.key) << ": " << failure.reason << "\n";
  }
  if (g.json) out << ordered_json{{"run_id", manifest.run_id}, {"scored", result.scores.size()}, {"failures", result.failures.size()}}.dump() << "\n";
  return result.ok() ? kSuccess : kBackendFailure;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineOptions {
  std::string method;
  std::int64_t deduction = 16;
  bool deduction_given = false;
  bool optimize = false;
  std::string references;
  std::string ebr_scores;
  std::string run_id;
  std::int64_t search_min = 0;
  std::int64_t search_max = 100;
};

int cmd_baseline(const GlobalOptions& g, const BaselineOptions& o, const std::string& output,
                 const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto bundle = io::load_bundle(g.data_dir);
  RunManifest manifest;
  manifest.command_line = args;
  hash_dataset_inputs(manifest, g.data_dir);
  manifest.config["method"] = o.method;

  std::vector<ScoredJudgment> scores;
  std::vector<ordered_json> info;
  if (o.method == "static") {
    manifest.backend_id = "static";
    scores = baselines::score_static(bundle);
  } else if (o.method == "msh") {
    std::int64_t deduction = o.deduction;
    if (o.optimize) {
      std::vector<ReferenceScore> references;
      if (!o.references.empty()) {
        hash_input(manifest, o.references);
        references = io::load_references(o.references);
      } else {
        if (!bundle.references()) throw evaluation::EvaluationError("--optimize-deduction needs reference scores");
        references = *bundle.references();
      }
      std::vector<Judgment> judgments;
      for (const auto& reference : references) {
        const Judgment* judgment = bundle.find_judgment(reference.key);
        if (!judgment) throw ReferenceError("reference for unknown judgment " + to_string(reference.key));
        judgments.push_back(*judgment);
      }
      const auto fit = baselines::optimize_msh_deduction(judgments, references, {o.search_min, o.search_max});
      deduction = fit.deduction;
      manifest.config["optimized_over"] = references.size();
      manifest.config["optimized_mae"] = fit.mae;
      info.push_back(ordered_json{{"metric", "msh_deduction"}, {"value", fit.deduction}, {"mae", fit.mae},
                                  {"n", references.size()}});
      if (!g.quiet && !g.json) err << fmt::format("optimized deduction: {} (MAE {:.2f} over {} reference(s))\n", fit.deduction, fit.mae, references.size());
    }
    manifest.config["deduction"] = deduction;
    manifest.backend_id = "msh-" + std::to_string(deduction);
    scores = baselines::score_msh(bundle, deduction);
  } else {
    if (o.ebr_scores.empty()) throw CLI::ValidationError("--method avg-ebr requires --ebr-scores");
    hash_input(manifest, o.ebr_scores);
    const auto ebr_scores = io::load_scores(o.ebr_scores);
    const auto fit = baselines::fit_avg_ebr_mapping(ebr_scores, bundle);
    ordered_json mapping;
    for (auto label : kAllLabels) {
      mapping[std::string(to_string(label))] = fit.means[static_cast<std::size_t>(label_rank(label))];
    }
    info.push_back(ordered_json{{"metric", "avg_ebr_mapping"}, {"value", mapping}});
    if (!g.json) {
      out << "Avg-EBR mapping:\n";
      for (auto label : kAllLabels) {
        out << fmt::format("  {:<14} {:.1f}\n", to_string(label), fit.means[static_cast<std::size_t>(label_rank(label))]);
      }
    }
    const auto label_mapping = fit.mapping();
    manifest.config["mapping"] = mapping;
    manifest.backend_id = "avg-ebr";
    scores = baselines::score_mapping(bundle, label_mapping);
  }

  manifest.run_id = o.run_id.empty() ? manifest.content_id() : o.run_id;
  for (auto& score : scores) score.run_id = manifest.run_id;
  io::save_scores(scores, output);
  write_manifest(manifest, output);
  if (g.json) print_records(out, info);
  if (!g.quiet && !g.json) err << fmt::format("wrote {} {} score(s) to {}\n", scores.size(), o.method, output);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// evaluate

struct NamedScores {
  std::string name;
  std::vector<ScoredJudgment> scores;
};

std::vector<NamedScores> load_named_scores(const std::vector<std::string>& files) {
  std::vector<NamedScores> out;
  std::map<std::string, int> seen;
  for (const auto& file : files) {
    std::map<ScoringMethod, std::vector<ScoredJudgment>> by_method;
    for (auto& score : io::load_scores(file)) by_method[score.method].push_back(std::move(score));
    for (auto& [method, scores] : by_method) out.push_back({std::string(to_string(method)), std::move(scores)});
  }
  for (const auto& named : out) seen[named.name] += 1;
  std::map<std::string, int> counter;
  for (auto& named : out) {
    if (seen[named.name] > 1) named.name += "#" + std::to_string(++counter[named.name]);
  }
  return out;
}

struct EvaluateOptions {
  std::vector<std::string> scores;
  std::string slices;
  std::string output;
  std::string points;
  bool label_averages = false;
  bool experts = false;
};

int cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o, std::ostream& out) {
  const auto bundle = io::load_bundle(g.data_dir);
  std::vector<evaluation::Slice> slices;
  if (o.slices.empty()) {
    slices = evaluation::default_slices();
  } else {
    for (const auto& name : split_csv(o.slices)) slices.push_back(evaluation::Slice::parse(name));
  }

  std::vector<ordered_json> records;
  std::vector<evaluation::EvalReport> reports;
  std::vector<ordered_json> points;
  const auto named = load_named_scores(o.scores);
  for (const auto& entry : named) {
    reports.push_back(evaluation::evaluate_against_reference(entry.name, entry.scores, bundle, slices));
    for (auto& record : evaluation::to_records(reports.back())) records.push_back(std::move(record));
    if (o.label_averages) {
      for (auto& record : evaluation::to_records(evaluation::avg_score_per_label(entry.scores, bundle), entry.name)) {
        records.push_back(std::move(record));
      }
    }
    if (!o.points.empty()) {
      for (auto& point : evaluation::score_points(entry.scores, bundle)) points.push_back(std::move(point));
    }
  }
  std::vector<evaluation::ExpertPairReport> experts;
  if (o.experts) {
    experts = evaluation::expert_agreement(bundle, slices);
    for (auto& record : evaluation::to_records(experts)) records.push_back(std::move(record));
  }

  if (!o.output.empty()) write_records(o.output, records);
  if (!o.points.empty()) write_records(o.points, points);

  if (g.json) {
    print_records(out, records);
  } else {
    out << evaluation::render_eval_table(reports);
    if (o.label_averages) {
      for (const auto& entry : named) {
        out << "\n" << entry.name << " average score per label:\n"
            << evaluation::render_label_averages(evaluation::avg_score_per_label(entry.scores, bundle));
      }
    }
    if (o.experts) out << "\nexpert agreement:\n" << evaluation::render_expert_table(experts);
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// agreement

struct AgreementOptions {
  std::vector<std::string> scores;
  std::size_t min_overlap = metrics::kDefaultMinOverlap;
  std::string output;
};

/// Binary Fleiss kappa over items whose rater count equals the most common count.
struct KappaSummary {
  std::optional<double> kappa;
  std::size_t items_used = 0;
  std::size_t items_skipped = 0;
  std::string note;
};

KappaSummary binary_kappa(const DatasetBundle& bundle) {
  std::map<std::string, std::vector<int>> by_item;
  for (const auto& judgment : bundle.judgments()) {
    auto& row = by_item[judgment.item_id];
    row.resize(2);
    row[static_cast<std::size_t>(metrics::collapse_binary(judgment.label))] += 1;
  }
  std::map<int, std::size_t> totals;
  for (const auto& [item, row] : by_item) totals[row[0] + row[1]] += 1;
  KappaSummary summary;
  if (totals.empty()) return summary;
  const int modal = std::max_element(totals.begin(), totals.end(), [](const auto& a, const auto& b) {
                      return a.second < b.second || (a.second == b.second && a.first < b.first);
                    })->first;
  metrics::RatingMatrix matrix;
  for (const auto& [item, row] : by_item) {
    if (row[0] + row[1] == modal) {
      matrix.counts.push_back(row);
    } else {
      ++summary.items_skipped;
    }
  }
  summary.items_used = matrix.counts.size();
  try {
    summary.kappa = metrics::fleiss_kappa(matrix);
  } catch (const metrics::MetricError& e) {
    summary.note = e.what();
  }
  return summary;
}

int cmd_agreement(const GlobalOptions& g, const AgreementOptions& o, std::ostream& out) {
  const auto bundle = io::load_bundle(g.data_dir);
  std::vector<ordered_json> records;
  std::string text;

  std::map<std::string, std::string> system_of_item;
  for (const auto& item : bundle.items()) system_of_item[item.id] = item.answer_system.name();
  if (!bundle.judgments().empty()) {
    text += fmt::format("{:<16} {:>6} {:>12} {:>13} {:>13} {:>9}\n", "group", "n", "missing_all", "missing_major",
                        "missing_minor", "complete");
    for (auto group_by : {metrics::GroupBy::overall, metrics::GroupBy::system, metrics::GroupBy::annotator}) {
      const char* kind = group_by == metrics::GroupBy::overall ? "overall"
                          : group_by == metrics::GroupBy::system ? "system"
                                                                 : "annotator";
      for (const auto& row : metrics::label_distribution(bundle.judgments(), group_by, system_of_item)) {
        text += fmt::format("{:<16} {:>6} {:>12} {:>13} {:>13} {:>9}\n", std::string(kind) + ":" + row.group, row.total,
                            metrics::round_half_up(row.percent[0]), metrics::round_half_up(row.percent[1]),
                            metrics::round_half_up(row.percent[2]), metrics::round_half_up(row.percent[3]));
        for (auto label : kAllLabels) {
          ordered_json record;
          record["metric"] = "label_percent";
          record["slice"] = std::string(kind) + ":" + row.group + ":" + std::string(to_string(label));
          record["value"] = row.percent[static_cast<std::size_t>(label_rank(label))];
          record["n"] = row.total;
          records.push_back(std::move(record));
        }
      }
    }
  }

  const auto kappa = binary_kappa(bundle);
  {
    ordered_json record;
    record["metric"] = "fleiss_kappa_binary";
    record["slice"] = "overall";
    record["value"] = kappa.kappa ? ordered_json(*kappa.kappa) : ordered_json(nullptr);
    record["n"] = kappa.items_used;
    record["items_skipped"] = kappa.items_skipped;
    records.push_back(std::move(record));
    text += fmt::format("\nFleiss kappa (complete vs. not): {} over {} item(s), {} skipped for unequal rater count{}\n",
                        kappa.kappa ? fmt::format("{:.3f}", *kappa.kappa) : std::string("-"), kappa.items_used,
                        kappa.items_skipped, kappa.note.empty() ? "" : " (" + kappa.note + ")");
  }

  const auto labels = evaluation::label_scores(bundle.judgments());
  const auto pre = metrics::pairwise_aggregate_tau(labels, o.min_overlap);
  {
    ordered_json record;
    record["metric"] = "pairwise_aggregate_tau";
    record["slice"] = "original_labels";
    record["value"] = pre.aggregate;
    record["n"] = pre.included_pairs;
    if (pre.aggregate_undefined_as_zero) record["value_undefined_as_zero"] = *pre.aggregate_undefined_as_zero;
    records.push_back(std::move(record));
    text += fmt::format("pairwise aggregate tau, original labels: {:.2f} over {} pair(s)\n", pre.aggregate,
                        pre.included_pairs);
  }

  std::vector<NamedScores> named;
  for (const auto& file : o.scores) named.push_back({file, io::load_scores(file)});
  for (const auto& entry : named) {
    std::vector<Judgment> covered;
    for (const auto& score : entry.scores) {
      const Judgment* judgment = bundle.find_judgment(score.key);
      if (!judgment) throw ReferenceError("score for unknown judgment " + to_string(score.key));
      covered.push_back(*judgment);
    }
    const auto shift = evaluation::agreement_shift(evaluation::label_scores(covered),
                                                   evaluation::method_scores(entry.scores), o.min_overlap);
    for (auto& record : evaluation::to_records(shift, entry.name)) records.push_back(std::move(record));
    text += "\n" + entry.name + ":\n" + evaluation::render_agreement(shift);
  }

  for (std::size_t a = 0; a < named.size(); ++a) {
    for (std::size_t b = a + 1; b < named.size(); ++b) {
      std::map<std::pair<JudgmentKey, ScoringMethod>, double> left;
      for (const auto& s : named[a].scores) left[{s.key, s.method}] = s.score;
      metrics::PairedScores shared;
      for (const auto& s : named[b].scores) {
        auto it = left.find({s.key, s.method});
        if (it != left.end()) shared.add(it->second, s.score);
      }
      ordered_json record;
      record["metric"] = "cross_run_tau";
      record["slice"] = named[a].name + "|" + named[b].name;
      std::optional<metrics::TauResult> tau;
      if (shared.size() >= 2) tau = metrics::try_kendall_tau_b(shared);
      record["value"] = tau ? ordered_json(tau->tau) : ordered_json(nullptr);
      record["n"] = shared.size();
      records.push_back(std::move(record));
      text += fmt::format("\ncross-file tau {} vs {}: {} over {} shared score(s)\n", named[a].name, named[b].name,
                          tau ? fmt::format("{:.3f}", tau->tau) : std::string("-"), shared.size());
    }
  }

  if (!o.output.empty()) write_records(o.output, records);
  if (g.json) {
    print_records(out, records);
  } else {
    out << text;
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// stability

int cmd_stability(const GlobalOptions& g, const RescaleOptions& o, int runs, const std::string& output,
                  const std::vector<std::string>& args, std::ostream& out) {
  const auto bundle = io::load_bundle(g.data_dir);
  const auto rubric = io::load_rubric(o.rubric);
  const auto prompts = prompts_of(o);
  const auto variant = parse_variant(o.variant);

  std::shared_ptr<ChatClient> client;
  if (o.backend == "live") client = std::make_shared<ChatClient>(o.live.config(o.concurrency));
  evaluation::BackendFactory factory = [&](const std::string& run_id) -> std::unique_ptr<ScoringBackend> {
    if (client) {
      return std::make_unique<LiveBackend>(client, CacheMode::bypass, fs::path(o.live.cache_dir) / "runs" / run_id);
    }
    return std::make_unique<RubricOracleBackend>();
  };

  RunManifest manifest;
  manifest.command_line = args;
  manifest.backend_id = client ? "openai:" + o.live.model : "rubric-oracle";
  manifest.config = rescale_config_json(o, prompts, variant);
  manifest.config["runs"] = runs;
  hash_dataset_inputs(manifest, g.data_dir);
  hash_input(manifest, o.rubric);
  manifest.run_id = o.run_id.empty() ? manifest.content_id() : o.run_id;

  RescaleRequest request{rubric, variant, policy_of(o), manifest.run_id, &prompts};
  const auto report = evaluation::stability_run(factory, bundle, request, runs, o.concurrency);
  const auto records = evaluation::to_records(report);
  if (!output.empty()) {
    write_records(output, records);
    write_manifest(manifest, output);
  }
  if (g.json) {
    print_records(out, records);
  } else {
    out << evaluation::render_stability(report);
  }
  const bool failed = std::any_of(report.runs.begin(), report.runs.end(), [](const auto& r) { return r.failures > 0; });
  return failed ? kBackendFailure : kSuccess;
}

// ---------------------------------------------------------------------------
// cache-stats

int cmd_cache_stats(const GlobalOptions& g, const std::string& dir, std::ostream& out) {
  const auto stats = cache_stats(dir);
  if (g.json) {
    out << ordered_json{{"entries", stats.entries}, {"hits", stats.hits}, {"misses", stats.misses}, {"bytes", stats.bytes}}.dump()
        << "\n";
  } else {
    out << fmt::format("entries {}\nhits {}\nmisses {}\nbytes {}\n", stats.entries, stats.hits, stats.misses, stats.bytes);
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rescale Likert judgments with explanations onto a 0-100 scale and evaluate the result."};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--data-dir", g.data_dir, "dataset directory")->capture_default_str();
  app.add_flag("--quiet,-q", g.quiet, "suppress progress output");
  app.add_flag("--json", g.json, "machine-readable output");

  bool strict = false;
  auto* validate = app.add_subcommand("validate", "check a dataset directory");
  validate->add_flag("--strict", strict, "treat warnings as errors");

  RescaleOptions rescale_opts;
  std::string rescale_out;
  auto* rescale = app.add_subcommand("rescale", "score judgments with the rescaling prompt");
  add_rescale_options(rescale, rescale_opts);
  rescale->add_option("--out,-o", rescale_out, "scores output file")->required();

  BaselineOptions baseline_opts;
  std::string baseline_out;
  auto* baseline = app.add_subcommand("baseline", "score judgments with a baseline method");
  baseline->add_option("--method", baseline_opts.method, "baseline method")
      ->required()
      ->check(CLI::IsMember({"static", "avg-ebr", "msh"}));
  auto* deduction = baseline->add_option("--deduction", baseline_opts.deduction, "MSH points per missing sentence")
                        ->check(CLI::NonNegativeNumber)
                        ->capture_default_str();
  auto* optimize = baseline->add_flag("--optimize-deduction", baseline_opts.optimize, "grid-search the MSH deduction");
  deduction->excludes(optimize);
  baseline->add_option("--search-min", baseline_opts.search_min, "smallest deduction searched")->capture_default_str();
  baseline->add_option("--search-max", baseline_opts.search_max, "largest deduction searched")->capture_default_str();
  baseline->add_option("--references", baseline_opts.references, "references file (default: the dataset's)")
      ->check(CLI::ExistingFile);
  baseline->add_option("--ebr-scores", baseline_opts.ebr_scores, "EBR scores for the Avg-EBR fit")->check(CLI::ExistingFile);
  baseline->add_option("--run-id", baseline_opts.run_id, "run id (default: hash of the manifest)");
  baseline->add_option("--out,-o", baseline_out, "scores output file")->required();

  EvaluateOptions evaluate_opts;
  auto* evaluate = app.add_subcommand("evaluate", "compare score files against reference scores");
  evaluate->add_option("--scores", evaluate_opts.scores, "score files")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--slices", evaluate_opts.slices, "comma-separated slices (overall or label names)");
  evaluate->add_option("--out,-o", evaluate_opts.output, "report records output file");
  evaluate->add_option("--points", evaluate_opts.points, "write (reference, score) points per judgment");
  evaluate->add_flag("--label-averages", evaluate_opts.label_averages, "average score per original label");
  evaluate->add_flag("--experts", evaluate_opts.experts, "agreement between expert reference columns");

  AgreementOptions agreement_opts;
  auto* agreement = app.add_subcommand("agreement", "label distribution and inter-annotator agreement");
  agreement->add_option("--scores", agreement_opts.scores, "rescaled score files")->check(CLI::ExistingFile);
  agreement->add_option("--min-overlap", agreement_opts.min_overlap, "minimum co-rated items per annotator pair")
      ->capture_default_str();
  agreement->add_option("--out,-o", agreement_opts.output, "report records output file");

  RescaleOptions stability_opts;
  int runs = 4;
  std::string stability_out;
  auto* stability = app.add_subcommand("stability", "repeat rescaling of the referenced judgments");
  add_rescale_options(stability, stability_opts);
  stability->add_option("--runs", runs, "number of runs")->check(CLI::PositiveNumber)->capture_default_str();
  stability->add_option("--out,-o", stability_out, "report records output file");

  std::string cache_dir = ".ebr-cache";
  auto* cache = app.add_subcommand("cache-stats", "summarize a response cache");
  cache->add_option("--cache-dir", cache_dir, "cache directory")->capture_default_str();

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("ebr");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& arg : argv_storage) argv.push_back(arg.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(g, strict, out);
    if (rescale->parsed()) return cmd_rescale(g, rescale_opts, rescale_out, args, out, err);
    if (baseline->parsed()) return cmd_baseline(g, baseline_opts, baseline_out, args, out, err);
    if (evaluate->parsed()) return cmd_evaluate(g, evaluate_opts, out);
    if (agreement->parsed()) return cmd_agreement(g, agreement_opts, out);
    if (stability->parsed()) return cmd_stability(g, stability_opts, runs, stability_out, args, out);
    if (cache->parsed()) return cmd_cache_stats(g, cache_dir, out);
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << "\n";
    return kBackendFailure;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& issue : e.report().issues) err << "  " << describe(issue) << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace ebr::cli
