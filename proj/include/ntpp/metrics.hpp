#pragma once

// Classification metrics for next-mark prediction and outcome heads.

#include "ntpp/data.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ntpp {

// Area under the ROC curve as the normalised Mann-Whitney statistic; tied
// scores across classes earn half credit. Throws AnalysisError when only one
// class is present.
double auroc(std::span<const double> scores, std::span<const int> targets);

// Area under the precision-recall curve by the trapezoid rule over distinct
// score thresholds, starting from (recall 0, precision 1).
double auprc(std::span<const double> scores, std::span<const int> targets);

// Support-weighted mean of per-class F1 over the classes present in `truth`.
double weighted_f1(std::span<const int> predicted, std::span<const int> truth,
                   int num_classes);

struct MetricSet {
  std::optional<double> weighted_f1;
  std::optional<double> auroc;
  std::optional<double> auprc;
};

// `scores` and `targets` are N x M. Multi-class: weighted F1 of the argmax
// plus one-vs-rest AUROC averaged over marks seen with both outcomes.
// Multi-label: AUROC and AUPRC averaged per mark over marks with both
// outcomes.
MetricSet classification_metrics(const Matrix& scores, const Matrix& targets,
                                 MarkMode mode);

// Binary outcome metrics; F1 uses a 0.5 threshold and support weighting.
MetricSet binary_metrics(std::span<const double> probabilities,
                         std::span<const int> labels);

}  // namespace ntpp
