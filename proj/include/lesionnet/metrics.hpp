#pragma once

#include <string>
#include <vector>

#include "lesionnet/dataset.hpp"
#include "lesionnet/infer.hpp"

namespace lesionnet {

/// Tie-aware Mann-Whitney AUC: (#{pos>neg} + 0.5 * #{pos=neg}) / (P*N),
/// computed with midranks in O(n log n). Needs both classes present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Fraction of (score >= threshold) == label; a score exactly at the
/// threshold counts as positive.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double threshold = 0.5);

struct TaskMetrics {
    double accuracy = 0.0;
    double auc = 0.0;
};

struct EvalReport {
    TaskMetrics melanoma;
    TaskMetrics sk;
    TaskMetrics average;  // unweighted mean of the two tasks
};

/// One-vs-rest evaluation of both binary tasks. Prediction and manifest id
/// sets must match exactly.
EvalReport evaluate(const std::vector<PredictionRecord>& predictions, const Manifest& manifest);

/// Aligned text table: task, accuracy, auc rows plus the average row.
std::string format_report(const EvalReport& report);
/// Single CSV row with a header line, for scripting.
std::string format_report_csv(const EvalReport& report);

}  // namespace lesionnet
