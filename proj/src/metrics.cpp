#include "ebr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ebr::metrics {
namespace {

struct TieSums {
  double pairs = 0.0;    // sum t(t-1)/2
  double cubic = 0.0;    // sum t(t-1)(t-2)
  double var_term = 0.0; // sum t(t-1)(2t+5)

  void add_group(double t) {
    if (t < 2) return;
    pairs += t * (t - 1) / 2;
    cubic += t * (t - 1) * (t - 2);
    var_term += t * (t - 1) * (2 * t + 5);
  }
};

template <typename Key>
TieSums tie_sums_sorted(const std::vector<std::size_t>& order, Key&& key) {
  TieSums sums;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    if (i < order.size() && key(order[i]) == key(order[i - 1])) {
      ++run;
    } else {
      sums.add_group(static_cast<double>(run));
      run = 1;
    }
  }
  return sums;
}

// Sorts `idx` by ys[] and returns the number of inversions.
std::uint64_t merge_count(std::vector<std::size_t>& idx, std::vector<std::size_t>& buffer, std::size_t lo,
                          std::size_t hi, const std::vector<double>& ys) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(idx, buffer, lo, mid, ys) + merge_count(idx, buffer, mid, hi, ys);
  std::size_t left = lo, right = mid, out = lo;
  while (left < mid && right < hi) {
    if (ys[idx[right]] < ys[idx[left]]) {
      swaps += mid - left;
      buffer[out++] = idx[right++];
    } else {
      buffer[out++] = idx[left++];
    }
  }
  while (left < mid) buffer[out++] = idx[left++];
  while (right < hi) buffer[out++] = idx[right++];
  std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo), buffer.begin() + static_cast<std::ptrdiff_t>(hi),
            idx.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

PairedScores::PairedScores(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
  if (x.size() != y.size()) throw MetricError("paired sequences differ in length");
}

double mae(const PairedScores& pairs) {
  if (pairs.empty()) throw MetricError("MAE of empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) total += std::fabs(pairs.x[i] - pairs.y[i]);
  return total / static_cast<double>(pairs.size());
}

std::optional<TauResult> try_kendall_tau_b(const PairedScores& pairs) {
  const std::size_t n = pairs.size();
  if (pairs.y.size() != n) throw MetricError("paired sequences differ in length");
  if (n < 2) throw MetricError("Kendall tau needs at least 2 pairs, got " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(pairs.x[i]) || std::isnan(pairs.y[i])) throw MetricError("NaN in Kendall tau input");
  }
  const auto& xs = pairs.x;
  const auto& ys = pairs.y;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] != xs[b] ? xs[a] < xs[b] : ys[a] < ys[b];
  });

  const TieSums x_ties = tie_sums_sorted(order, [&](std::size_t i) { return xs[i]; });
  const TieSums joint_ties =
      tie_sums_sorted(order, [&](std::size_t i) { return std::pair<double, double>(xs[i], ys[i]); });

  std::vector<std::size_t> buffer(n);
  const std::uint64_t swaps = merge_count(order, buffer, 0, n, ys);
  const TieSums y_ties = tie_sums_sorted(order, [&](std::size_t i) { return ys[i]; });

  const double dn = static_cast<double>(n);
  const double total_pairs = dn * (dn - 1) / 2;
  const double x_untied = total_pairs - x_ties.pairs;
  const double y_untied = total_pairs - y_ties.pairs;
  if (x_untied <= 0 || y_untied <= 0) return std::nullopt;

  // concordant - discordant
  const double score = total_pairs - x_ties.pairs - y_ties.pairs + joint_ties.pairs - 2.0 * static_cast<double>(swaps);
  TauResult result;
  result.n = n;
  result.tau = std::clamp(score / std::sqrt(x_untied * y_untied), -1.0, 1.0);

  const double m = dn * (dn - 1);
  double variance = (m * (2 * dn + 5) - x_ties.var_term - y_ties.var_term) / 18.0 +
                    (2.0 * x_ties.pairs * y_ties.pairs) / m;
  if (n > 2) variance += x_ties.cubic * y_ties.cubic / (9.0 * m * (dn - 2));
  if (variance > 0) {
    const double z = score / std::sqrt(variance);
    result.p_value = std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
  } else {
    result.p_value = 1.0;
  }
  return result;
}

TauResult kendall_tau_b(const PairedScores& pairs) {
  auto result = try_kendall_tau_b(pairs);
  if (!result) throw UndefinedTau("Kendall tau-b undefined: one margin is entirely tied");
  return *result;
}

double fleiss_kappa(const RatingMatrix& matrix) {
  const auto& rows = matrix.counts;
  if (rows.size() < 2) throw MetricError("Fleiss kappa needs at least 2 items");
  const std::size_t categories = rows.front().size();
  if (categories == 0) throw MetricError("Fleiss kappa needs at least one category");
  const long raters = std::accumulate(rows.front().begin(), rows.front().end(), 0L);
  if (raters < 2) throw MetricError("Fleiss kappa needs at least 2 raters per item");

  std::vector<double> category_totals(categories, 0.0);
  double agreement_sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != categories) throw MetricError("item " + std::to_string(i) + " has a different category count");
    long total = 0;
    double squares = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      if (row[j] < 0) throw MetricError("negative count in rating matrix");
      total += row[j];
      squares += static_cast<double>(row[j]) * row[j];
      category_totals[j] += row[j];
    }
    if (total != raters) {
      throw MetricError("item " + std::to_string(i) + " has " + std::to_string(total) + " raters, expected " +
                        std::to_string(raters));
    }
    const double r = static_cast<double>(raters);
    agreement_sum += (squares - r) / (r * (r - 1));
  }
  const double n_items = static_cast<double>(rows.size());
  const double observed = agreement_sum / n_items;
  double expected = 0.0;
  for (double total : category_totals) {
    const double p = total / (n_items * static_cast<double>(raters));
    expected += p * p;
  }
  if (expected >= 1.0) throw MetricError("Fleiss kappa undefined: all ratings fall in one category");
  return (observed - expected) / (1.0 - expected);
}

int collapse_binary(LikertLabel label) { return label == LikertLabel::complete ? 1 : 0; }

AggregateTau pairwise_aggregate_tau(const ScoresByAnnotator& scores, std::size_t min_overlap) {
  if (scores.size() < 2) throw MetricError("pairwise tau needs at least 2 annotators");
  AggregateTau out;
  double included_sum = 0.0;
  double with_zero_sum = 0.0;
  std::size_t with_zero_count = 0;
  for (auto first = scores.begin(); first != scores.end(); ++first) {
    for (auto second = std::next(first); second != scores.end(); ++second) {
      PairTau pair;
      pair.first = first->first;
      pair.second = second->first;
      PairedScores shared;
      for (const auto& [item, score] : first->second) {
        auto other = second->second.find(item);
        if (other != second->second.end()) shared.add(score, other->second);
      }
      pair.overlap = shared.size();
      if (pair.overlap < std::max<std::size_t>(min_overlap, 2)) {
        pair.exclusion_reason = "overlap " + std::to_string(pair.overlap) + " below minimum";
      } else {
        pair.tau = try_kendall_tau_b(shared);
        ++with_zero_count;
        if (pair.tau) {
          pair.included = true;
          included_sum += pair.tau->tau;
          with_zero_sum += pair.tau->tau;
          ++out.included_pairs;
        } else {
          pair.exclusion_reason = "undefined tau (tied margin)";
        }
      }
      out.pairs.push_back(std::move(pair));
    }
  }
  if (out.included_pairs == 0) throw MetricError("no annotator pair has a defined tau");
  out.aggregate = included_sum / static_cast<double>(out.included_pairs);
  out.aggregate_undefined_as_zero = with_zero_sum / static_cast<double>(with_zero_count);
  return out;
}

std::vector<LabelDistributionRow> label_distribution(std::span<const Judgment> judgments, GroupBy group_by,
                                                     const std::map<std::string, std::string>& system_of_item) {
  if (judgments.empty()) throw MetricError("label distribution of empty input");
  std::map<std::string, std::array<std::size_t, 4>> counts;
  for (const auto& judgment : judgments) {
    std::string group;
    switch (group_by) {
      case GroupBy::overall:
        group = "overall";
        break;
      case GroupBy::annotator:
        group = judgment.annotator_id;
        break;
      case GroupBy::system: {
        auto it = system_of_item.find(judgment.item_id);
        if (it == system_of_item.end()) throw MetricError("no answer system known for item '" + judgment.item_id + "'");
        group = it->second;
        break;
      }
    }
    counts[group][static_cast<std::size_t>(label_rank(judgment.label))] += 1;
  }
  std::vector<LabelDistributionRow> rows;
  for (const auto& [group, tally] : counts) {
    LabelDistributionRow row;
    row.group = group;
    row.total = std::accumulate(tally.begin(), tally.end(), std::size_t{0});
    if (row.total == 0) throw MetricError("empty group '" + group + "'");
    for (std::size_t i = 0; i < 4; ++i) row.percent[i] = 100.0 * static_cast<double>(tally[i]) / static_cast<double>(row.total);
    rows.push_back(std::move(row));
  }
  return rows;
}

long long round_half_up(double value) { return static_cast<long long>(std::floor(value + 0.5)); }

}  // namespace ebr::metrics
