#include "scda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "scda/error.hpp"

namespace scda {

TargetSet::TargetSet(Matrix features, std::vector<int> ground_truth)
    : features_(std::move(features)), ground_truth_(std::move(ground_truth)) {
  if (!ground_truth_.empty() &&
      static_cast<int>(ground_truth_.size()) != features_.rows()) {
    throw ShapeError("TargetSet: ground truth size does not match rows");
  }
  pseudo_labels_.assign(features_.rows(), -1);
}

namespace {

void validate_spec(const ShiftSpec& spec) {
  if (spec.num_known < 1) throw ContractViolation("generate: num_known >= 1");
  if (spec.num_implicit < 0)
    throw ContractViolation("generate: num_implicit >= 0");
  if (spec.dim < 1) throw ContractViolation("generate: dim >= 1");
  if (!(spec.sigma > 0.0)) throw ContractViolation("generate: sigma > 0");
  if (!(spec.center_range > 0.0))
    throw ContractViolation("generate: center_range > 0");
  if (spec.min_separation_sigmas < 0.0)
    throw ContractViolation("generate: min_separation_sigmas >= 0");
  if (spec.center_dim < 0 || spec.center_dim > spec.dim)
    throw ContractViolation("generate: center_dim in [0, dim]");
  if (spec.source_per_class < 1 || spec.target_per_class < 1)
    throw ContractViolation("generate: samples per class >= 1");
  if (!(spec.imbalance_ratio > 0.0) || spec.imbalance_ratio > 1.0)
    throw ContractViolation("generate: imbalance_ratio in (0, 1]");
  const std::size_t ts = spec.translation.size();
  if (ts != 0 && ts != 1 && ts != static_cast<std::size_t>(spec.dim))
    throw ContractViolation("generate: translation must have 0, 1 or dim entries");
}

Matrix sample_centers(const ShiftSpec& spec, Rng& rng) {
  const int total = spec.num_known + spec.num_implicit;
  const int active = spec.center_dim > 0 ? spec.center_dim : spec.dim;
  const double min_dist = spec.min_separation_sigmas * spec.sigma;
  Matrix centers(total, spec.dim);
  int rejections = 0;
  for (int c = 0; c < total; ++c) {
    for (;;) {
      std::vector<double> cand(spec.dim, 0.0);
      for (int j = 0; j < active; ++j)
        cand[j] = rng.uniform(-spec.center_range, spec.center_range);
      bool ok = true;
      for (int prev = 0; prev < c && ok; ++prev) {
        double d2 = 0.0;
        for (int j = 0; j < spec.dim; ++j) {
          const double diff = cand[j] - centers.at(prev, j);
          d2 += diff * diff;
        }
        ok = d2 >= min_dist * min_dist;
      }
      if (ok) {
        for (int j = 0; j < spec.dim; ++j) centers.at(c, j) = cand[j];
        break;
      }
      if (++rejections > 10000) {
        throw GeneratorError(
            "center sampling exceeded 10000 rejections; enlarge center_range "
            "or reduce min_separation_sigmas");
      }
    }
  }
  return centers;
}

std::vector<double> resolve_translation(const ShiftSpec& spec) {
  std::vector<double> t(spec.dim, 0.0);
  if (spec.translation.size() == 1) {
    t.assign(spec.dim, spec.translation[0]);
  } else if (!spec.translation.empty()) {
    t = spec.translation;
  }
  return t;
}

void apply_shift(std::vector<double>& x, const ShiftSpec& spec,
                 const std::vector<double>& translation) {
  const double c = std::cos(spec.rotation_angle);
  const double s = std::sin(spec.rotation_angle);
  for (int p = 0; p + 1 < spec.dim; p += 2) {
    const double a = x[p], b = x[p + 1];
    x[p] = c * a - s * b;
    x[p + 1] = s * a + c * b;
  }
  for (int j = 0; j < spec.dim; ++j)
    x[j] = spec.shift_scale * x[j] + translation[j];
}

}  // namespace

void validate_shift_spec(const ShiftSpec& spec) { validate_spec(spec); }

GeneratedPair generate(const ShiftSpec& spec, Rng& rng) {
  validate_spec(spec);
  const int total_classes = spec.num_known + spec.num_implicit;

  Rng centers_rng = rng.fork(1);
  Rng source_rng = rng.fork(2);
  Rng target_rng = rng.fork(3);
  Rng imbalance_rng = rng.fork(4);

  const Matrix centers = sample_centers(spec, centers_rng);
  const std::vector<double> translation = resolve_translation(spec);

  // A quarter of the classes may be subsampled to mimic class imbalance.
  std::vector<double> class_ratio(total_classes, 1.0);
  if (spec.imbalance_ratio < 1.0) {
    std::vector<int> order(total_classes);
    std::iota(order.begin(), order.end(), 0);
    imbalance_rng.shuffle(order);
    const int shrunk = (total_classes + 3) / 4;
    for (int i = 0; i < shrunk; ++i)
      class_ratio[order[i]] = spec.imbalance_ratio;
  }

  auto class_count = [](int per_class, double ratio) {
    return std::max(2, static_cast<int>(std::lround(per_class * ratio)));
  };

  GeneratedPair out;

  int source_rows = 0;
  for (int c = 0; c < spec.num_known; ++c)
    source_rows += class_count(spec.source_per_class, class_ratio[c]);
  out.source.features = Matrix(source_rows, spec.dim);
  out.source.labels.reserve(source_rows);
  out.source.num_classes = spec.num_known;
  int row = 0;
  for (int c = 0; c < spec.num_known; ++c) {
    const int n = class_count(spec.source_per_class, class_ratio[c]);
    for (int i = 0; i < n; ++i, ++row) {
      for (int j = 0; j < spec.dim; ++j)
        out.source.features.at(row, j) =
            centers.at(c, j) + spec.sigma * source_rng.next_gaussian();
      out.source.labels.push_back(c);
    }
  }

  int target_rows = 0;
  for (int c = 0; c < total_classes; ++c)
    target_rows += class_count(spec.target_per_class, class_ratio[c]);
  Matrix target_features(target_rows, spec.dim);
  std::vector<int> ground_truth;
  ground_truth.reserve(target_rows);
  row = 0;
  std::vector<double> point(spec.dim);
  for (int c = 0; c < total_classes; ++c) {
    const int n = class_count(spec.target_per_class, class_ratio[c]);
    for (int i = 0; i < n; ++i, ++row) {
      for (int j = 0; j < spec.dim; ++j)
        point[j] = centers.at(c, j) + spec.sigma * target_rng.next_gaussian();
      apply_shift(point, spec, translation);
      for (int j = 0; j < spec.dim; ++j) target_features.at(row, j) = point[j];
      ground_truth.push_back(c);
    }
  }
  out.target = TargetSet(std::move(target_features), std::move(ground_truth));
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& cell, int line_no) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": non-numeric cell '" + cell + "'");
  }
  return value;
}

int parse_int(const std::string& cell, int line_no) {
  int value = 0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": non-integer cell '" + cell + "'");
  }
  return value;
}

struct CsvTable {
  int dim = 0;
  bool has_gt = false;
  Matrix features;
  std::vector<int> labels;
  std::vector<int> gt;
};

CsvTable read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("line 1: empty file");

  const std::vector<std::string> header = split_line(lines[0]);
  CsvTable table;
  std::size_t pos = 0;
  while (pos < header.size() &&
         header[pos] == "f" + std::to_string(pos)) {
    ++pos;
  }
  table.dim = static_cast<int>(pos);
  if (table.dim == 0 || pos >= header.size() || header[pos] != "label") {
    throw ParseError(
        "line 1: header must be f0,...,f{d-1},label[,gt]; got '" + lines[0] +
        "'");
  }
  ++pos;
  if (pos < header.size()) {
    if (header[pos] != "gt") {
      throw ParseError("line 1: unknown column '" + header[pos] + "'");
    }
    if (pos + 1 != header.size()) {
      throw ParseError("line 1: unknown column '" + header[pos + 1] + "'");
    }
    table.has_gt = true;
    ++pos;
  }

  const int rows = static_cast<int>(lines.size()) - 1;
  if (rows == 0) throw ParseError("line 2: no data rows");
  const std::size_t want_cells = pos;
  table.features = Matrix(rows, table.dim);
  table.labels.reserve(rows);
  if (table.has_gt) table.gt.reserve(rows);

  for (int r = 0; r < rows; ++r) {
    const int line_no = r + 2;
    const std::vector<std::string> cells = split_line(lines[r + 1]);
    if (cells.size() != want_cells) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(want_cells) + " cells, got " +
                       std::to_string(cells.size()));
    }
    for (int j = 0; j < table.dim; ++j)
      table.features.at(r, j) = parse_double(cells[j], line_no);
    table.labels.push_back(parse_int(cells[table.dim], line_no));
    if (table.has_gt)
      table.gt.push_back(parse_int(cells[table.dim + 1], line_no));
  }
  return table;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LabeledSet load_labeled_csv(const std::string& path) {
  CsvTable table = read_table(path);
  LabeledSet set;
  set.features = std::move(table.features);
  set.labels = std::move(table.labels);
  int max_label = -1;
  for (std::size_t r = 0; r < set.labels.size(); ++r) {
    if (set.labels[r] < 0) {
      throw ParseError("line " + std::to_string(r + 2) +
                       ": source labels must be >= 0");
    }
    max_label = std::max(max_label, set.labels[r]);
  }
  set.num_classes = max_label + 1;
  std::vector<bool> seen(set.num_classes, false);
  for (int label : set.labels) seen[label] = true;
  for (int c = 0; c < set.num_classes; ++c) {
    if (!seen[c]) {
      throw ParseError("class " + std::to_string(c) +
                       " has no samples (labels must cover 0..max)");
    }
  }
  return set;
}

TargetSet load_target_csv(const std::string& path) {
  CsvTable table = read_table(path);
  for (std::size_t r = 0; r < table.labels.size(); ++r) {
    if (table.labels[r] < -1) {
      throw ParseError("line " + std::to_string(r + 2) +
                       ": pseudo label must be >= -1");
    }
    if (table.has_gt && table.gt[r] < 0) {
      throw ParseError("line " + std::to_string(r + 2) +
                       ": gt must be >= 0");
    }
  }
  TargetSet set(std::move(table.features), std::move(table.gt));
  set.pseudo_labels_ = std::move(table.labels);
  return set;
}

namespace {

void write_header(std::ofstream& out, int dim, bool with_gt) {
  for (int j = 0; j < dim; ++j) out << 'f' << j << ',';
  out << "label";
  if (with_gt) out << ",gt";
  out << '\n';
}

}  // namespace

void save_csv(const std::string& path, const LabeledSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_header(out, set.features.cols(), false);
  for (int r = 0; r < set.features.rows(); ++r) {
    for (int j = 0; j < set.features.cols(); ++j)
      out << format_double(set.features.at(r, j)) << ',';
    out << set.labels[r] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void save_csv(const std::string& path, const TargetSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_header(out, set.features_.cols(), set.has_ground_truth());
  for (int r = 0; r < set.features_.rows(); ++r) {
    for (int j = 0; j < set.features_.cols(); ++j)
      out << format_double(set.features_.at(r, j)) << ',';
    out << set.pseudo_labels_[r];
    if (set.has_ground_truth()) out << ',' << set.ground_truth_[r];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::vector<int>> batches(int n, int batch_size, Rng& rng) {
  if (batch_size < 2) throw ContractViolation("batches: batch_size >= 2");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

}  // namespace scda
