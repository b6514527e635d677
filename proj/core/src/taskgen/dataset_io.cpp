#include "afa/taskgen/dataset_io.hpp"

#include <charconv>
#include <map>
#include <sstream>
#include <stdexcept>

namespace afa {
namespace {

const Tensor& find(const std::map<std::string, const Tensor*>& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw FormatError("dataset container lacks '" + name + "'");
  return *it->second;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw FormatError("bad number '" + s + "' in dataset csv");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

NamedTensors dataset_to_tensors(const Dataset& ds) {
  NamedTensors out;
  out.emplace_back("x", ds.x);
  out.emplace_back("r", ds.r);
  out.emplace_back("y", ds.y);
  Tensor base(Shape{ds.d()});
  for (std::size_t j = 0; j < ds.d(); ++j) base[j] = ds.baseline[j];
  out.emplace_back("baseline", base);
  out.emplace_back("kind", Tensor::scalar(ds.kind == TaskKind::kRegression ? 0.0 : 1.0));
  if (ds.true_probs) out.emplace_back("true_probs", *ds.true_probs);
  if (ds.kernel) {
    out.emplace_back("kernel.lengthscales", Tensor::vector(ds.kernel->lengthscales));
    out.emplace_back("kernel.params",
                     Tensor::vector({ds.kernel->kind == KernelKind::kRbf ? 0.0 : 1.0, ds.kernel->outputscale,
                                     ds.kernel->noise_std}));
  }
  if (ds.norm) {
    out.emplace_back("norm.mean", Tensor::vector(ds.norm->mean));
    out.emplace_back("norm.sd", Tensor::vector(ds.norm->sd));
  }
  return out;
}

Dataset dataset_from_tensors(const NamedTensors& tensors) {
  std::map<std::string, const Tensor*> m;
  for (const auto& [name, t] : tensors) m[name] = &t;
  Dataset ds;
  ds.x = find(m, "x");
  ds.r = find(m, "r");
  ds.y = find(m, "y");
  for (double v : find(m, "baseline").values()) ds.baseline.push_back(v != 0.0 ? 1 : 0);
  ds.kind = find(m, "kind").item() == 0.0 ? TaskKind::kRegression : TaskKind::kClassification;
  if (m.contains("true_probs")) ds.true_probs = find(m, "true_probs");
  if (m.contains("kernel.params")) {
    const Tensor& p = find(m, "kernel.params");
    GpKernel k;
    k.kind = p[0] == 0.0 ? KernelKind::kRbf : KernelKind::kMatern52;
    k.outputscale = p[1];
    k.noise_std = p[2];
    k.lengthscales = find(m, "kernel.lengthscales").values();
    ds.kernel = std::move(k);
  }
  if (m.contains("norm.mean")) ds.norm = NormStats{find(m, "norm.mean").values(), find(m, "norm.sd").values()};
  ds.validate();
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) { save_tensors(path, dataset_to_tensors(ds)); }

Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_tensors(load_tensors(path)); }

std::string dataset_to_csv(const Dataset& ds) {
  const std::size_t n = ds.n(), d = ds.d();
  std::string out = "# kind=" + to_string(ds.kind) + " classes=" + std::to_string(ds.num_classes()) + " baseline=";
  for (std::size_t j = 0; j < d; ++j) out += (j ? "," : "") + std::to_string(ds.baseline[j]);
  out += "\n";
  for (std::size_t j = 1; j <= d; ++j) out += "x" + std::to_string(j) + ",";
  for (std::size_t j = 1; j <= d; ++j) out += "r" + std::to_string(j) + ",";
  out += "y";
  for (std::size_t j = 1; j <= d; ++j) out += ",x" + std::to_string(j) + "_true";
  out += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out += (ds.r.at(i, j) == 1.0 ? format_double(ds.x.at(i, j)) : "") + ",";
    for (std::size_t j = 0; j < d; ++j) out += (ds.r.at(i, j) == 1.0 ? "1," : "0,");
    out += ds.kind == TaskKind::kRegression ? format_double(ds.y.at(i, 0)) : std::to_string(ds.label(i));
    for (std::size_t j = 0; j < d; ++j) out += "," + format_double(ds.x.at(i, j));
    out += "\n";
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string meta, header, line;
  if (!std::getline(in, meta) || meta.rfind("# ", 0) != 0) throw FormatError("dataset csv: missing metadata line");
  std::map<std::string, std::string> kv;
  for (const auto& tok : split(meta.substr(2), ' ')) {
    auto eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  if (!std::getline(in, header)) throw FormatError("dataset csv: missing header");
  const std::size_t cols = split(header, ',').size();
  if (cols < 4 || (cols - 1) % 3 != 0) throw FormatError("dataset csv: header does not match x, r, y, x_true layout");
  const std::size_t d = (cols - 1) / 3;

  Dataset ds;
  ds.kind = task_kind_from_string(kv["kind"]);
  for (const auto& b : split(kv["baseline"], ',')) ds.baseline.push_back(b == "1" ? 1 : 0);
  const std::size_t classes = ds.kind == TaskKind::kClassification ? std::stoul(kv["classes"]) : 0;
  std::vector<double> xs, rs, ys;
  std::vector<std::size_t> labels;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != cols) throw FormatError("dataset csv: row " + std::to_string(n + 1) + " has wrong field count");
    for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_double(f[2 * d + 1 + j]));
    for (std::size_t j = 0; j < d; ++j) rs.push_back(parse_double(f[d + j]));
    if (ds.kind == TaskKind::kRegression)
      ys.push_back(parse_double(f[2 * d]));
    else
      labels.push_back(std::stoul(f[2 * d]));
    ++n;
  }
  ds.x = Tensor(Shape{n, d}, std::move(xs));
  ds.r = Tensor(Shape{n, d}, std::move(rs));
  ds.y = ds.kind == TaskKind::kRegression ? Tensor(Shape{n, 1}, std::move(ys)) : one_hot(labels, classes);
  ds.validate();
  return ds;
}

}  // namespace afa
