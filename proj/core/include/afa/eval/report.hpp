#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "afa/eval/acquisition.hpp"
#include "afa/eval/metrics.hpp"

namespace afa {

// One task-level value: the metric averaged over that task's queries at one
// step (AUROC is computed across the queries instead). Absent metrics have
// no row.
struct MetricRow {
  std::string method;
  std::string task_id;
  std::size_t step = 0;
  std::string metric;
  double value = 0.0;
};

// nll, then mse (regression) or brier (classification), kl when truth
// probabilities exist, auroc for classification, coverage_50/80/90/95 for
// regression.
std::vector<MetricRow> compute_metrics(const std::string& method, const std::vector<StepRecord>& records);

// CSV schema: method,task_id,step,metric,value
std::string metrics_to_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> metrics_from_csv(const std::string& text);

struct SummaryEntry {
  std::string method;
  std::string metric;
  std::size_t step = 0;
  MeanSe stat;  // across tasks
};

// Sorted by (method, metric, step); task values are combined in task-id
// order, so the result does not depend on input order.
std::vector<SummaryEntry> summarize(const std::vector<MetricRow>& rows);
std::string summary_to_json(const std::vector<SummaryEntry>& entries);

struct DeltaEntry {
  std::string method;
  std::string baseline;
  std::string metric;
  std::size_t step = 0;
  MeanSe delta;  // paired per task: baseline - method
};

// Paired comparison on shared (task, step, metric) cells. Throws
// std::invalid_argument when the two runs cover different task sets.
std::vector<DeltaEntry> compare_methods(const std::vector<MetricRow>& method, const std::vector<MetricRow>& baseline);
std::string deltas_to_csv(const std::vector<DeltaEntry>& deltas);

}  // namespace afa
