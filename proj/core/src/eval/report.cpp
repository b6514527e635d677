#include "afa/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "afa/diffkernel/tensor_io.hpp"
#include "afa/taskgen/dataset_io.hpp"

namespace afa {
namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::string coverage_name(double level) { return "coverage_" + std::to_string(static_cast<int>(std::lround(level * 100))); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::vector<MetricRow> compute_metrics(const std::string& method, const std::vector<StepRecord>& records) {
  std::map<std::pair<std::string, std::size_t>, std::vector<const StepRecord*>> groups;
  for (const auto& r : records) groups[{r.task_id, r.step}].push_back(&r);

  std::vector<MetricRow> rows;
  for (auto& [key, recs] : groups) {
    const auto& [task, step] = key;
    // Fixed summation order regardless of record order.
    std::sort(recs.begin(), recs.end(), [](const StepRecord* a, const StepRecord* b) { return a->query < b->query; });
    std::map<std::string, double> sums;
    bool have_kl = true;
    std::vector<std::vector<double>> probs;
    std::vector<std::size_t> labels;
    for (const StepRecord* r : recs) {
      if (r->kind == TaskKind::kRegression) {
        if (r->prediction.size() != 2 || r->y.size() != 1) throw std::invalid_argument("regression record has wrong width");
        const double mean = r->prediction[0], var = r->prediction[1], y = r->y[0];
        sums["nll"] += 0.5 * std::log(2.0 * std::numbers::pi * var) + 0.5 * (y - mean) * (y - mean) / var;
        sums["mse"] += (y - mean) * (y - mean);
        for (double level : kCoverageLevels) sums[coverage_name(level)] += in_interval(mean, var, y, level) ? 1.0 : 0.0;
      } else {
        if (r->prediction.size() != r->y.size()) throw std::invalid_argument("classification record has wrong width");
        const std::size_t label = argmax(r->y);
        sums["nll"] += categorical_nll(r->prediction, label);
        sums["brier"] += brier(r->prediction, label);
        probs.push_back(r->prediction);
        labels.push_back(label);
      }
      if (r->true_probs) sums["kl"] += kl_divergence(*r->true_probs, r->prediction);
      else have_kl = false;
    }
    if (!have_kl) sums.erase("kl");
    const double n = static_cast<double>(recs.size());
    for (const auto& [metric, total] : sums) rows.push_back({method, task, step, metric, total / n});
    if (!probs.empty())
      if (auto a = auroc_multiclass(probs, labels)) rows.push_back({method, task, step, "auroc", *a});
  }
  return rows;
}

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out = "method,task_id,step,metric,value\n";
  for (const auto& r : rows)
    out += r.method + "," + r.task_id + "," + std::to_string(r.step) + "," + r.metric + "," + format_double(r.value) + "\n";
  return out;
}

std::vector<MetricRow> metrics_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,task_id,step,metric,value")
    throw FormatError("metrics csv: missing header");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 5) throw FormatError("metrics csv: expected 5 fields in '" + line + "'");
    try {
      rows.push_back({f[0], f[1], static_cast<std::size_t>(std::stoull(f[2])), f[3], std::stod(f[4])});
    } catch (const std::logic_error&) {
      throw FormatError("metrics csv: bad number in '" + line + "'");
    }
  }
  return rows;
}

std::vector<SummaryEntry> summarize(const std::vector<MetricRow>& rows) {
  std::map<std::tuple<std::string, std::string, std::size_t>, std::map<std::string, double>> cells;
  for (const auto& r : rows) cells[{r.method, r.metric, r.step}][r.task_id] = r.value;
  std::vector<SummaryEntry> out;
  for (const auto& [key, by_task] : cells) {
    std::vector<double> values;
    for (const auto& [task, v] : by_task) values.push_back(v);
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), mean_se(values)});
  }
  return out;
}

std::string summary_to_json(const std::vector<SummaryEntry>& entries) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& e : entries) {
    auto& series = j[e.method][e.metric];
    series.push_back({{"step", e.step}, {"mean", e.stat.mean}, {"se", e.stat.se}, {"tasks", e.stat.n}});
  }
  return j.dump(2) + "\n";
}

std::vector<DeltaEntry> compare_methods(const std::vector<MetricRow>& method, const std::vector<MetricRow>& baseline) {
  auto index = [](const std::vector<MetricRow>& rows, std::string* name, std::set<std::string>* tasks) {
    std::map<std::tuple<std::string, std::size_t, std::string>, double> m;
    for (const auto& r : rows) {
      if (name->empty()) *name = r.method;
      else if (*name != r.method) throw std::invalid_argument("compare: one report mixes methods " + *name + " and " + r.method);
      m[{r.metric, r.step, r.task_id}] = r.value;
      tasks->insert(r.task_id);
    }
    return m;
  };
  std::string mname, bname;
  std::set<std::string> mt, bt;
  const auto mi = index(method, &mname, &mt);
  const auto bi = index(baseline, &bname, &bt);
  if (mt != bt) throw std::invalid_argument("compare: reports cover different task sets (" + std::to_string(mt.size()) +
                                            " vs " + std::to_string(bt.size()) + " tasks)");
  // Both maps iterate in (metric, step, task) order.
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> deltas;
  for (const auto& [key, v] : mi)
    if (auto it = bi.find(key); it != bi.end()) deltas[{std::get<0>(key), std::get<1>(key)}].push_back(it->second - v);
  std::vector<DeltaEntry> out;
  for (const auto& [key, d] : deltas) out.push_back({mname, bname, key.first, key.second, mean_se(d)});
  return out;
}

std::string deltas_to_csv(const std::vector<DeltaEntry>& deltas) {
  std::string out = "method,baseline,metric,step,delta_mean,delta_se,tasks\n";
  for (const auto& d : deltas)
    out += d.method + "," + d.baseline + "," + d.metric + "," + std::to_string(d.step) + "," +
           format_double(d.delta.mean) + "," + format_double(d.delta.se) + "," + std::to_string(d.delta.n) + "\n";
  return out;
}

}  // namespace afa
