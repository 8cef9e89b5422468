#include "ebr/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "ebr/io.hpp"

namespace ebr::evaluation {
namespace {

using nlohmann::ordered_json;

SliceMetrics slice_metrics(const std::string& name, const metrics::PairedScores& pairs) {
  SliceMetrics out;
  out.slice = name;
  out.n = pairs.size();
  out.mae = metrics::mae(pairs);
  if (pairs.size() < 2) {
    out.tau_note = "fewer than 2 judgments";
    return out;
  }
  out.tau = metrics::try_kendall_tau_b(pairs);
  if (!out.tau) {
    const bool x_constant = std::adjacent_find(pairs.x.begin(), pairs.x.end(), std::not_equal_to<>()) == pairs.x.end();
    out.tau_note = x_constant ? "constant predictor" : "constant reference";
  }
  return out;
}

ordered_json tau_record(std::string_view metric, const std::string& slice, const SliceMetrics& m) {
  ordered_json record;
  record["metric"] = metric;
  record["slice"] = slice;
  if (m.tau) {
    record["value"] = m.tau->tau;
    record["p_value"] = m.tau->p_value;
  } else {
    record["value"] = nullptr;
    record["undefined"] = m.tau_note;
  }
  record["n"] = m.n;
  return record;
}

ordered_json mae_record(const std::string& slice, const SliceMetrics& m) {
  ordered_json record;
  record["metric"] = "mae";
  record["slice"] = slice;
  record["value"] = m.mae;
  record["n"] = m.n;
  return record;
}

Spread spread_of(const std::vector<double>& values) {
  if (values.empty()) return {};
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi};
}

std::string fixed(double value, int decimals) { return fmt::format("{:.{}f}", value, decimals); }

}  // namespace

Slice Slice::parse(std::string_view text) {
  if (text == "overall") return overall();
  if (auto label = try_parse_label(text)) return of(*label);
  throw Error("unknown slice '" + std::string(text) + "' (expected overall or a label name)");
}

std::vector<Slice> default_slices() {
  return {Slice::overall(), Slice::of(LikertLabel::missing_minor), Slice::of(LikertLabel::missing_major)};
}

const SliceMetrics& EvalReport::slice(std::string_view name) const {
  for (const auto& s : slices) {
    if (s.slice == name) return s;
  }
  throw Error("report has no slice '" + std::string(name) + "'");
}

EvalReport evaluate_against_reference(std::string method_name, std::span<const ScoredJudgment> method_scores,
                                      const DatasetBundle& bundle, std::span<const Slice> slices) {
  EvalReport report;
  report.method = std::move(method_name);
  std::vector<metrics::PairedScores> per_slice(slices.size());
  for (const auto& score : method_scores) {
    const Judgment* judgment = bundle.find_judgment(score.key);
    if (!judgment) throw EvaluationError("score for unknown judgment " + to_string(score.key));
    const ReferenceScore* reference = bundle.find_reference(score.key);
    if (!reference) continue;
    for (std::size_t s = 0; s < slices.size(); ++s) {
      if (slices[s].contains(judgment->label)) per_slice[s].add(score.score, reference->mean_score());
    }
  }
  for (std::size_t s = 0; s < slices.size(); ++s) {
    if (per_slice[s].empty()) {
      throw EvaluationError("slice '" + slices[s].name + "' has no judgment with both a " + report.method +
                            " score and a reference score");
    }
    report.slices.push_back(slice_metrics(slices[s].name, per_slice[s]));
  }
  return report;
}

std::vector<ExpertPairReport> expert_agreement(const DatasetBundle& bundle, std::span<const Slice> slices) {
  if (!bundle.references()) throw EvaluationError("dataset has no reference scores");
  const auto& references = *bundle.references();
  std::size_t columns = 0;
  for (const auto& reference : references) columns = std::max(columns, reference.expert_scores.size());
  if (columns < 2) throw EvaluationError("expert agreement needs at least 2 expert columns");

  std::vector<ExpertPairReport> out;
  for (std::size_t i = 0; i < columns; ++i) {
    for (std::size_t j = i + 1; j < columns; ++j) {
      ExpertPairReport pair{i + 1, j + 1, {}};
      std::vector<metrics::PairedScores> per_slice(slices.size());
      for (const auto& reference : references) {
        if (reference.expert_scores.size() <= j) continue;
        const Judgment* judgment = bundle.find_judgment(reference.key);
        for (std::size_t s = 0; s < slices.size(); ++s) {
          if (judgment && slices[s].contains(judgment->label)) {
            per_slice[s].add(static_cast<double>(reference.expert_scores[i]),
                             static_cast<double>(reference.expert_scores[j]));
          }
        }
      }
      for (std::size_t s = 0; s < slices.size(); ++s) {
        if (per_slice[s].empty()) {
          throw EvaluationError(fmt::format("experts ({},{}) share no instance in slice '{}'", i + 1, j + 1, slices[s].name));
        }
        pair.slices.push_back(slice_metrics(slices[s].name, per_slice[s]));
      }
      out.push_back(std::move(pair));
    }
  }
  return out;
}

metrics::ScoresByAnnotator label_scores(std::span<const Judgment> judgments) {
  metrics::ScoresByAnnotator out;
  for (const auto& judgment : judgments) out[judgment.annotator_id][judgment.item_id] = label_rank(judgment.label);
  return out;
}

metrics::ScoresByAnnotator method_scores(std::span<const ScoredJudgment> scores) {
  metrics::ScoresByAnnotator out;
  for (const auto& score : scores) out[score.key.annotator][score.key.item_id] = score.score;
  return out;
}

AgreementShift agreement_shift(const metrics::ScoresByAnnotator& original_labels,
                               const metrics::ScoresByAnnotator& rescaled_scores, std::size_t min_overlap) {
  auto coverage = [](const metrics::ScoresByAnnotator& scores) {
    std::set<JudgmentKey> keys;
    for (const auto& [annotator, items] : scores) {
      for (const auto& entry : items) keys.insert({entry.first, annotator});
    }
    return keys;
  };
  if (coverage(original_labels) != coverage(rescaled_scores)) {
    throw EvaluationError("labels and rescaled scores cover different judgments");
  }
  AgreementShift shift{metrics::pairwise_aggregate_tau(original_labels, min_overlap),
                       metrics::pairwise_aggregate_tau(rescaled_scores, min_overlap),
                       {}};
  for (std::size_t p = 0; p < shift.pre.pairs.size(); ++p) {
    const auto& before = shift.pre.pairs[p];
    const auto& after = shift.post.pairs[p];
    PairShift row{before.first, before.second, std::nullopt, std::nullopt, std::nullopt};
    if (before.included) row.pre = before.tau->tau;
    if (after.included) row.post = after.tau->tau;
    if (row.pre && row.post) row.delta = *row.post - *row.pre;
    shift.pairs.push_back(std::move(row));
  }
  return shift;
}

LabelAverages avg_score_per_label(std::span<const ScoredJudgment> scores, const DatasetBundle& bundle) {
  std::array<double, 4> sums{};
  std::array<std::size_t, 4> counts{};
  for (const auto& score : scores) {
    const Judgment* judgment = bundle.find_judgment(score.key);
    if (!judgment) throw EvaluationError("score for unknown judgment " + to_string(score.key));
    const auto slot = static_cast<std::size_t>(label_rank(judgment->label));
    sums[slot] += score.score;
    counts[slot] += 1;
  }
  LabelAverages out;
  for (auto label : kAllLabels) {
    const auto slot = static_cast<std::size_t>(label_rank(label));
    if (counts[slot] == 0) continue;
    out.rows.push_back({label, sums[slot] / static_cast<double>(counts[slot]), counts[slot]});
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (out.rows[i].mean < out.rows[i - 1].mean) {
      out.order_violations.push_back(std::string(to_string(out.rows[i - 1].label)) + " > " +
                                     std::string(to_string(out.rows[i].label)));
    }
  }
  return out;
}

StabilityReport stability_run(const BackendFactory& make_backend, const DatasetBundle& bundle,
                              const RescaleRequest& request, int n_runs, std::size_t concurrency) {
  if (n_runs < 1) throw EvaluationError("stability needs at least one run");
  if (!bundle.references() || bundle.references()->empty()) {
    throw EvaluationError("stability runs need reference scores");
  }
  std::vector<Judgment> subset;
  for (const auto& reference : *bundle.references()) subset.push_back(*bundle.find_judgment(reference.key));

  StabilityReport report;
  std::vector<double> averages, taus, maes;
  for (int k = 1; k <= n_runs; ++k) {
    RescaleRequest run_request = request;
    run_request.run_id = request.run_id + "-run" + std::to_string(k);
    auto backend = make_backend(run_request.run_id);
    const auto result = rescale_judgments(*backend, bundle, subset, run_request, concurrency);

    StabilityRow row;
    row.run_id = run_request.run_id;
    row.scored = result.scores.size();
    row.failures = result.failures.size();
    if (!result.scores.empty()) {
      metrics::PairedScores pairs;
      double total = 0.0;
      for (const auto& score : result.scores) {
        total += score.score;
        pairs.add(score.score, bundle.find_reference(score.key)->mean_score());
      }
      row.avg_score = total / static_cast<double>(result.scores.size());
      row.mae = metrics::mae(pairs);
      if (pairs.size() >= 2) row.tau = metrics::try_kendall_tau_b(pairs);
      averages.push_back(row.avg_score);
      maes.push_back(row.mae);
      if (row.tau) taus.push_back(row.tau->tau);
    }
    report.runs.push_back(std::move(row));
  }
  report.avg_score = spread_of(averages);
  report.tau = spread_of(taus);
  report.mae = spread_of(maes);
  return report;
}

std::string format_tau(const std::optional<metrics::TauResult>& tau) {
  if (!tau) return "-";
  return fixed(tau->tau, 2) + (tau->significant() ? "†" : "");
}

std::string render_eval_table(std::span<const EvalReport> reports) {
  if (reports.empty()) return {};
  std::string out = fmt::format("{:<16}", "");
  for (const auto& s : reports.front().slices) out += fmt::format(" | {:^20}", s.slice);
  out += "\n" + fmt::format("{:<16}", "method");
  for (std::size_t i = 0; i < reports.front().slices.size(); ++i) out += fmt::format(" | {:>8} {:>11}", "tau", "MAE");
  out += "\n";
  for (const auto& report : reports) {
    out += fmt::format("{:<16}", report.method);
    for (const auto& s : report.slices) {
      out += fmt::format(" | {:>8} {:>11}", format_tau(s.tau), fixed(s.mae, 1));
    }
    out += "\n";
  }
  return out;
}

std::string render_expert_table(std::span<const ExpertPairReport> pairs) {
  if (pairs.empty()) return {};
  std::string out = fmt::format("{:<8}", "pair");
  for (const auto& s : pairs.front().slices) out += fmt::format(" | {:^20}", s.slice);
  out += "\n";
  for (const auto& pair : pairs) {
    out += fmt::format("{:<8}", fmt::format("({},{})", pair.first, pair.second));
    for (const auto& s : pair.slices) out += fmt::format(" | {:>8} {:>11}", format_tau(s.tau), fixed(s.mae, 2));
    out += "\n";
  }
  return out;
}

std::string render_agreement(const AgreementShift& shift) {
  std::string out = fmt::format("pre  (labels):  {}  over {} pair(s)\n", fixed(shift.pre.aggregate, 2), shift.pre.included_pairs);
  out += fmt::format("post (scores):  {}  over {} pair(s)\n", fixed(shift.post.aggregate, 2), shift.post.included_pairs);
  for (const auto& pair : shift.pairs) {
    auto show = [](const std::optional<double>& v) { return v ? fixed(*v, 3) : std::string("-"); };
    out += fmt::format("  {:<12} {:<12} pre {:>7} post {:>7} delta {:>7}\n", pair.first, pair.second, show(pair.pre),
                       show(pair.post), show(pair.delta));
  }
  return out;
}

std::string render_label_averages(const LabelAverages& averages) {
  std::string out = fmt::format("{:<14} {:>13} {:>6}\n", "label", "average score", "n");
  for (const auto& row : averages.rows) {
    out += fmt::format("{:<14} {:>13} {:>6}\n", to_string(row.label), fixed(row.mean, 2), row.count);
  }
  for (const auto& violation : averages.order_violations) out += "order violation: " + violation + "\n";
  return out;
}

std::string render_stability(const StabilityReport& report) {
  std::string out = fmt::format("{:<24} {:>9} {:>6} {:>7} {:>8}\n", "run", "avg score", "tau", "MAE", "failures");
  for (const auto& row : report.runs) {
    out += fmt::format("{:<24} {:>9} {:>6} {:>7} {:>8}\n", row.run_id, fixed(row.avg_score, 2), format_tau(row.tau),
                       fixed(row.mae, 2), row.failures);
  }
  out += fmt::format("spread: avg {} tau {} MAE {}\n", fixed(report.avg_score.range(), 2), fixed(report.tau.range(), 2),
                     fixed(report.mae.range(), 2));
  return out;
}

std::vector<ordered_json> to_records(const EvalReport& report) {
  std::vector<ordered_json> out;
  for (const auto& s : report.slices) {
    auto tau = tau_record("kendall_tau_b", s.slice, s);
    tau["method"] = report.method;
    auto mae = mae_record(s.slice, s);
    mae["method"] = report.method;
    out.push_back(std::move(tau));
    out.push_back(std::move(mae));
  }
  return out;
}

std::vector<ordered_json> to_records(std::span<const ExpertPairReport> pairs) {
  std::vector<ordered_json> out;
  for (const auto& pair : pairs) {
    const auto name = fmt::format("({},{})", pair.first, pair.second);
    for (const auto& s : pair.slices) {
      auto tau = tau_record("kendall_tau_b", s.slice, s);
      tau["experts"] = name;
      auto mae = mae_record(s.slice, s);
      mae["experts"] = name;
      out.push_back(std::move(tau));
      out.push_back(std::move(mae));
    }
  }
  return out;
}

std::vector<ordered_json> to_records(const AgreementShift& shift, std::string_view method) {
  std::vector<ordered_json> out;
  auto aggregate = [&](std::string_view slice, const metrics::AggregateTau& tau) {
    ordered_json record;
    record["metric"] = "pairwise_aggregate_tau";
    record["slice"] = slice;
    record["value"] = tau.aggregate;
    record["n"] = tau.included_pairs;
    record["method"] = method;
    if (tau.aggregate_undefined_as_zero) record["value_undefined_as_zero"] = *tau.aggregate_undefined_as_zero;
    out.push_back(std::move(record));
  };
  aggregate("pre", shift.pre);
  aggregate("post", shift.post);
  for (std::size_t p = 0; p < shift.pairs.size(); ++p) {
    const auto& pair = shift.pairs[p];
    ordered_json record;
    record["metric"] = "pair_tau_delta";
    record["slice"] = pair.first + "|" + pair.second;
    record["value"] = pair.delta ? ordered_json(*pair.delta) : ordered_json(nullptr);
    record["n"] = shift.post.pairs[p].overlap;
    record["pre"] = pair.pre ? ordered_json(*pair.pre) : ordered_json(nullptr);
    record["post"] = pair.post ? ordered_json(*pair.post) : ordered_json(nullptr);
    record["method"] = method;
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<ordered_json> to_records(const LabelAverages& averages, std::string_view method) {
  std::vector<ordered_json> out;
  for (const auto& row : averages.rows) {
    ordered_json record;
    record["metric"] = "avg_score";
    record["slice"] = to_string(row.label);
    record["value"] = row.mean;
    record["n"] = row.count;
    record["method"] = method;
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<ordered_json> to_records(const StabilityReport& report) {
  std::vector<ordered_json> out;
  for (const auto& row : report.runs) {
    ordered_json avg;
    avg["metric"] = "avg_score";
    avg["slice"] = "overall";
    avg["value"] = row.avg_score;
    avg["n"] = row.scored;
    avg["failures"] = row.failures;
    avg["run_id"] = row.run_id;
    out.push_back(std::move(avg));
    ordered_json tau;
    tau["metric"] = "kendall_tau_b";
    tau["slice"] = "overall";
    tau["value"] = row.tau ? ordered_json(row.tau->tau) : ordered_json(nullptr);
    if (row.tau) tau["p_value"] = row.tau->p_value;
    tau["n"] = row.scored;
    tau["run_id"] = row.run_id;
    out.push_back(std::move(tau));
    ordered_json mae;
    mae["metric"] = "mae";
    mae["slice"] = "overall";
    mae["value"] = row.mae;
    mae["n"] = row.scored;
    mae["run_id"] = row.run_id;
    out.push_back(std::move(mae));
  }
  for (const auto& [name, spread] : {std::pair{"avg_score", report.avg_score}, {"kendall_tau_b", report.tau}, {"mae", report.mae}}) {
    ordered_json record;
    record["metric"] = "spread";
    record["slice"] = name;
    record["value"] = spread.range();
    record["min"] = spread.min;
    record["max"] = spread.max;
    record["n"] = report.runs.size();
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<ordered_json> score_points(std::span<const ScoredJudgment> scores, const DatasetBundle& bundle) {
  std::vector<ordered_json> out;
  for (const auto& score : scores) {
    const Judgment* judgment = bundle.find_judgment(score.key);
    if (!judgment) continue;
    ordered_json point;
    point["item_id"] = score.key.item_id;
    point["annotator"] = score.key.annotator;
    point["label"] = to_string(judgment->label);
    point["method"] = to_string(score.method);
    point["score"] = io::number_json(score.score);
    if (const ReferenceScore* reference = bundle.find_reference(score.key)) {
      point["reference"] = reference->mean_score();
    }
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace ebr::evaluation
