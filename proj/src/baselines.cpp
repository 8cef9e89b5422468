#include "ebr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ebr/metrics.hpp"

namespace ebr::baselines {
namespace {

std::size_t distinct_count(const std::vector<std::int64_t>& indices) {
  return std::set<std::int64_t>(indices.begin(), indices.end()).size();
}

ScoredJudgment make_score(const Judgment& judgment, double score, ScoringMethod method, std::string backend) {
  ScoredJudgment out;
  out.key = judgment.key();
  out.score = score;
  out.method = method;
  out.backend_id = std::move(backend);
  return out;
}

}  // namespace

double static_rescale(LikertLabel label) {
  switch (label) {
    case LikertLabel::complete:
      return 100.0;
    case LikertLabel::missing_minor:
      return 70.0;
    case LikertLabel::missing_major:
      return 30.0;
    case LikertLabel::missing_all:
      return 0.0;
  }
  return 0.0;
}

LabelMapping::LabelMapping(std::array<double, 4> values, ScoreScale scale) : values_(values) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!scale.contains(values_[i])) {
      throw Error("mapping value for " + std::string(to_string(kAllLabels[i])) + " outside the scale");
    }
    if (i > 0 && values_[i] < values_[i - 1]) {
      throw Error("mapping is not monotone: " + std::string(to_string(kAllLabels[i - 1])) + " > " +
                  std::string(to_string(kAllLabels[i])));
    }
  }
}

LabelMapping LabelMapping::static_mapping() {
  std::array<double, 4> values{};
  for (auto label : kAllLabels) values[static_cast<std::size_t>(label_rank(label))] = static_rescale(label);
  return LabelMapping(values);
}

LabelMapping AvgEbrFit::mapping() const {
  if (!monotone()) {
    std::string message = "Avg-EBR means are not monotone in label order:";
    for (const auto& v : violations) message += " " + v + ";";
    throw Error(message);
  }
  return LabelMapping(means);
}

AvgEbrFit fit_avg_ebr_mapping(std::span<const ScoredJudgment> ebr_scores, std::span<const LikertLabel> labels) {
  if (ebr_scores.size() != labels.size()) throw Error("scores and labels differ in length");
  AvgEbrFit fit;
  std::array<double, 4> sums{};
  for (std::size_t i = 0; i < ebr_scores.size(); ++i) {
    const auto slot = static_cast<std::size_t>(label_rank(labels[i]));
    sums[slot] += ebr_scores[i].score;
    fit.counts[slot] += 1;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (fit.counts[i] == 0) throw MissingLabel("no EBR scores for label " + std::string(to_string(kAllLabels[i])));
    fit.means[i] = sums[i] / static_cast<double>(fit.counts[i]);
  }
  for (std::size_t i = 1; i < 4; ++i) {
    if (fit.means[i] < fit.means[i - 1]) {
      fit.violations.push_back(std::string(to_string(kAllLabels[i - 1])) + " > " + std::string(to_string(kAllLabels[i])));
    }
  }
  return fit;
}

AvgEbrFit fit_avg_ebr_mapping(std::span<const ScoredJudgment> ebr_scores, const DatasetBundle& bundle) {
  std::vector<LikertLabel> labels;
  labels.reserve(ebr_scores.size());
  for (const auto& score : ebr_scores) {
    const Judgment* judgment = bundle.find_judgment(score.key);
    if (!judgment) throw ReferenceError("score for unknown judgment " + to_string(score.key));
    labels.push_back(judgment->label);
  }
  return fit_avg_ebr_mapping(ebr_scores, labels);
}

double apply_mapping(const LabelMapping& mapping, const Judgment& judgment) { return mapping[judgment.label]; }

double msh_score(std::size_t missing_count, std::int64_t deduction) {
  const double raw = 100.0 - static_cast<double>(deduction) * static_cast<double>(missing_count);
  return std::clamp(raw, 0.0, 100.0);
}

double msh_score(const Judgment& judgment, std::int64_t deduction) {
  return msh_score(distinct_count(judgment.missing_sentences), deduction);
}

DeductionFit optimize_msh_deduction(std::span<const Judgment> judgments, std::span<const ReferenceScore> references,
                                    DeductionSearch search) {
  if (judgments.empty()) throw Error("MSH optimization needs at least one judgment");
  if (search.last < search.first) throw Error("empty deduction search range");

  std::map<JudgmentKey, double> reference_mean;
  for (const auto& reference : references) reference_mean[reference.key] = reference.mean_score();

  std::vector<std::size_t> missing;
  std::vector<double> targets;
  for (const auto& judgment : judgments) {
    auto it = reference_mean.find(judgment.key());
    if (it == reference_mean.end()) throw Error("no reference score for judgment " + to_string(judgment.key()));
    missing.push_back(distinct_count(judgment.missing_sentences));
    targets.push_back(it->second);
  }

  DeductionFit fit;
  bool have_best = false;
  for (std::int64_t d = search.first; d <= search.last; ++d) {
    metrics::PairedScores pairs;
    for (std::size_t i = 0; i < missing.size(); ++i) pairs.add(msh_score(missing[i], d), targets[i]);
    const double error = metrics::mae(pairs);
    fit.scan.emplace_back(d, error);
    if (!have_best || error < fit.mae) {
      fit.deduction = d;
      fit.mae = error;
      have_best = true;
    }
  }
  return fit;
}

std::vector<ScoredJudgment> score_static(const DatasetBundle& bundle) {
  std::vector<ScoredJudgment> out;
  for (const auto& judgment : bundle.judgments()) {
    out.push_back(make_score(judgment, static_rescale(judgment.label), ScoringMethod::static_mapping, "static"));
  }
  return out;
}

std::vector<ScoredJudgment> score_mapping(const DatasetBundle& bundle, const LabelMapping& mapping) {
  std::vector<ScoredJudgment> out;
  for (const auto& judgment : bundle.judgments()) {
    out.push_back(make_score(judgment, apply_mapping(mapping, judgment), ScoringMethod::avg_ebr, "avg-ebr"));
  }
  return out;
}

std::vector<ScoredJudgment> score_msh(const DatasetBundle& bundle, std::int64_t deduction) {
  std::vector<ScoredJudgment> out;
  for (const auto& judgment : bundle.judgments()) {
    out.push_back(make_score(judgment, msh_score(judgment, deduction), ScoringMethod::msh,
                             "msh-" + std::to_string(deduction)));
  }
  return out;
}

}  // namespace ebr::baselines
