#include "ntpp/metrics.hpp"

#include "ntpp/error.hpp"

#include <algorithm>
#include <numeric>

namespace ntpp {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw AnalysisError("metrics: scores and targets differ in length");
  if (a == 0) throw AnalysisError("metrics: no predictions");
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

bool both_classes(const Matrix& targets, Eigen::Index col) {
  const double positives = targets.col(col).sum();
  return positives > 0.0 && positives < static_cast<double>(targets.rows());
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> targets) {
  check_aligned(scores.size(), targets.size());
  // Mid-ranks over ascending scores; U = sum of positive ranks - n1(n1+1)/2.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (targets[order[k]] != 0) {
        positive_rank_sum += mid_rank;
        n_pos += 1.0;
      }
    }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw AnalysisError("AUROC undefined: targets contain a single class");
  }
  return (positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double auprc(std::span<const double> scores, std::span<const int> targets) {
  check_aligned(scores.size(), targets.size());
  const auto total_pos = static_cast<double>(
      std::count_if(targets.begin(), targets.end(), [](int t) { return t != 0; }));
  if (total_pos == 0.0) throw AnalysisError("AUPRC undefined: no positive targets");
  const std::vector<std::size_t> order = order_by_score_desc(scores);
  double tp = 0.0, fp = 0.0;
  double prev_recall = 0.0, prev_precision = 1.0, area = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (targets[order[j]] != 0 ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
    i = j;
  }
  return area;
}

double weighted_f1(std::span<const int> predicted, std::span<const int> truth,
                   int num_classes) {
  check_aligned(predicted.size(), truth.size());
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0),
      fn(num_classes, 0.0), support(num_classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw AnalysisError("weighted_f1: class index out of range");
    }
    support[t] += 1.0;
    if (t == p) {
      tp[t] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  double acc = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    if (support[c] == 0.0) continue;
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    acc += support[c] * (denom > 0.0 ? 2.0 * tp[c] / denom : 0.0);
  }
  return acc / static_cast<double>(truth.size());
}

MetricSet classification_metrics(const Matrix& scores, const Matrix& targets,
                                 MarkMode mode) {
  if (scores.rows() != targets.rows() || scores.cols() != targets.cols()) {
    throw AnalysisError("metrics: score and target matrices differ in shape");
  }
  if (scores.rows() == 0) throw AnalysisError("metrics: no predictions");
  MetricSet out;
  const Eigen::Index n = scores.rows();
  const Eigen::Index marks = scores.cols();

  if (mode == MarkMode::kMultiClass) {
    std::vector<int> predicted(n), truth(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index p = 0, t = 0;
      scores.row(i).maxCoeff(&p);
      targets.row(i).maxCoeff(&t);
      predicted[i] = static_cast<int>(p);
      truth[i] = static_cast<int>(t);
    }
    out.weighted_f1 = weighted_f1(predicted, truth, static_cast<int>(marks));
  }

  double roc_sum = 0.0, pr_sum = 0.0;
  int counted = 0;
  for (Eigen::Index m = 0; m < marks; ++m) {
    if (!both_classes(targets, m)) continue;
    std::vector<double> s(scores.col(m).data(), scores.col(m).data() + n);
    std::vector<int> t(n);
    for (Eigen::Index i = 0; i < n; ++i) t[i] = targets(i, m) > 0.5 ? 1 : 0;
    roc_sum += auroc(s, t);
    pr_sum += auprc(s, t);
    ++counted;
  }
  if (counted > 0) {
    out.auroc = roc_sum / counted;
    out.auprc = pr_sum / counted;
  } else if (mode == MarkMode::kMultiLabel) {
    throw AnalysisError("AUROC undefined: every mark has a single class");
  }
  return out;
}

MetricSet binary_metrics(std::span<const double> probabilities,
                         std::span<const int> labels) {
  check_aligned(probabilities.size(), labels.size());
  MetricSet out;
  std::vector<int> predicted(probabilities.size()), truth(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    predicted[i] = probabilities[i] >= 0.5 ? 1 : 0;
    truth[i] = labels[i] != 0 ? 1 : 0;
  }
  out.weighted_f1 = weighted_f1(predicted, truth, 2);
  out.auroc = auroc(probabilities, truth);
  out.auprc = auprc(probabilities, truth);
  return out;
}

}  // namespace ntpp
