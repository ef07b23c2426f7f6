#include "scda/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "scda/error.hpp"

namespace scda {

namespace eval::detail {

const std::vector<int>& ground_truth(const TargetSet& t) {
  return t.ground_truth_;
}

}  // namespace eval::detail

OsMetrics os_metrics(std::span<const int> predictions, const TargetSet& target,
                     int num_known) {
  if (num_known < 1) throw ContractViolation("os_metrics: num_known >= 1");
  if (static_cast<int>(predictions.size()) != target.size())
    throw ShapeError("os_metrics: predictions length != target size");
  const std::vector<int>& gt = eval::detail::ground_truth(target);
  if (gt.empty())
    throw ContractViolation("os_metrics: target carries no ground truth");

  const int rows = num_known + 1;  // known classes + pooled unknown
  std::vector<int> correct(static_cast<std::size_t>(rows), 0);
  OsMetrics m;
  m.class_counts.assign(static_cast<std::size_t>(rows), 0);

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int g = gt[i];
    if (g < 0) throw ContractViolation("os_metrics: negative ground truth");
    const int gc = g < num_known ? g : num_known;
    const int p = predictions[i];
    if (p < 0) throw ContractViolation("os_metrics: negative prediction");
    const int pc = p < num_known ? p : num_known;
    ++m.class_counts[static_cast<std::size_t>(gc)];
    if (pc == gc) ++correct[static_cast<std::size_t>(gc)];
  }

  m.per_class.assign(static_cast<std::size_t>(rows), -1.0);
  double sum_all = 0.0, sum_known = 0.0;
  int cnt_all = 0, cnt_known = 0;
  for (int c = 0; c < rows; ++c) {
    const int support = m.class_counts[static_cast<std::size_t>(c)];
    if (support == 0) {
      m.skipped_classes.push_back(c);
      continue;
    }
    const double acc = static_cast<double>(correct[static_cast<std::size_t>(c)]) / support;
    m.per_class[static_cast<std::size_t>(c)] = acc;
    sum_all += acc;
    ++cnt_all;
    if (c < num_known) {
      sum_known += acc;
      ++cnt_known;
    }
  }
  if (cnt_known == 0)
    throw ContractViolation("os_metrics: no known-class samples in target");
  m.os = sum_all / cnt_all;
  m.os_star = sum_known / cnt_known;
  return m;
}

double k_error(int k_star, int k_gt) {
  if (k_star < 0 || k_gt < 0)
    throw ContractViolation("k_error: counts must be non-negative");
  return std::abs(k_star - k_gt);
}

int implicit_class_count(const TargetSet& target, int num_known) {
  if (num_known < 0)
    throw ContractViolation("implicit_class_count: num_known >= 0");
  const std::vector<int>& gt = eval::detail::ground_truth(target);
  std::vector<int> implicit;
  for (int g : gt)
    if (g >= num_known) implicit.push_back(g);
  std::sort(implicit.begin(), implicit.end());
  implicit.erase(std::unique(implicit.begin(), implicit.end()), implicit.end());
  return static_cast<int>(implicit.size());
}

CorrespondenceResult correspondence(const Mlp& f, const SoftmaxClassifier& c,
                                    const TargetSet& target, int n) {
  if (n < 1) throw ContractViolation("correspondence: n >= 1");
  if (c.out_dim() <= c.num_known)
    throw ContractViolation("correspondence: classifier has no discovered outputs");
  if (target.size() == 0)
    throw ShapeError("correspondence: empty target set");
  const std::vector<int>& gt = eval::detail::ground_truth(target);
  if (gt.empty())
    throw ContractViolation("correspondence: target carries no ground truth");

  const Matrix probs = forward(f, c, target.features()).probs;
  const int rows = target.size();

  CorrespondenceResult res;
  res.short_supply = rows < n;
  const int take = std::min(n, rows);

  std::vector<int> order(static_cast<std::size_t>(rows));
  std::vector<int> seen;
  for (int d = c.num_known; d < c.out_dim(); ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + take, order.end(),
                      [&](int a, int b) {
                        const double pa = probs.at(a, d);
                        const double pb = probs.at(b, d);
                        if (pa != pb) return pa > pb;
                        return a < b;
                      });
    for (int i = 0; i < take; ++i) {
      const int g = gt[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      if (g >= c.num_known) seen.push_back(g);
    }
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  res.distinct = static_cast<int>(seen.size());
  return res;
}

namespace {

template <typename T>
std::vector<T> parse_vector(const nlohmann::ordered_json& j, const char* key) {
  if (!j.is_array()) throw ParseError(std::string("report: ") + key + " must be an array");
  std::vector<T> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError(std::string("report: ") + key + " entry not a number");
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace

std::string report_to_string(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["format"] = "scda-report";
  doc["version"] = 1;
  doc["seed"] = report.seed;
  doc["config_hash"] = report.config_hash;
  doc["ablation"] = report.ablation;
  doc["k_star"] = report.k_star;
  doc["k_gt"] = report.k_gt;
  doc["k_error"] = report.k_error;
  doc["os"] = report.os;
  doc["os_star"] = report.os_star;
  doc["per_class_accuracy"] = report.per_class_accuracy;
  doc["class_counts"] = report.class_counts;
  doc["skipped_classes"] = report.skipped_classes;
  nlohmann::ordered_json corr = nlohmann::ordered_json::object();
  for (const auto& [n, count] : report.correspondence)
    corr[std::to_string(n)] = count;
  doc["correspondence"] = corr;
  return doc.dump(2) + "\n";
}

MetricsReport report_from_string(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: invalid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != "scda-report" ||
        doc.value("version", 0) != 1) {
      throw ParseError("report: missing scda-report/1 marker");
    }
    MetricsReport r;
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.config_hash = doc.at("config_hash").get<std::string>();
    r.ablation = doc.at("ablation").get<std::string>();
    r.k_star = doc.at("k_star").get<int>();
    r.k_gt = doc.at("k_gt").get<int>();
    r.k_error = doc.at("k_error").get<double>();
    r.os = doc.at("os").get<double>();
    r.os_star = doc.at("os_star").get<double>();
    r.per_class_accuracy = parse_vector<double>(doc.at("per_class_accuracy"), "per_class_accuracy");
    r.class_counts = parse_vector<int>(doc.at("class_counts"), "class_counts");
    r.skipped_classes = parse_vector<int>(doc.at("skipped_classes"), "skipped_classes");
    const auto& corr = doc.at("correspondence");
    if (!corr.is_object()) throw ParseError("report: correspondence must be an object");
    for (const auto& [key, value] : corr.items()) {
      int n = 0;
      try {
        n = std::stoi(key);
      } catch (const std::exception&) {
        throw ParseError("report: correspondence key '" + key + "' not an integer");
      }
      r.correspondence[n] = value.get<int>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

void save_report(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << report_to_string(report);
  if (!out) throw IoError("write failed: " + path);
}

MetricsReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_string(buf.str());
}

}  // namespace scda
