#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "scda/data.hpp"
#include "scda/error.hpp"
#include "scda/eval.hpp"
#include "scda/matrix.hpp"
#include "scda/rng.hpp"

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("scda_data_" + name)).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(bool(out));
  out << text;
}

// Mean feature vector of every class, from labels.
scda::Matrix class_means(const scda::Matrix& x, const std::vector<int>& labels,
                         int num_classes) {
  scda::Matrix means(num_classes, x.cols());
  std::vector<int> counts(num_classes, 0);
  for (int i = 0; i < x.rows(); ++i) {
    ++counts[labels[i]];
    for (int j = 0; j < x.cols(); ++j) means.at(labels[i], j) += x.at(i, j);
  }
  for (int c = 0; c < num_classes; ++c) {
    REQUIRE(counts[c] > 0);
    for (int j = 0; j < x.cols(); ++j) means.at(c, j) /= counts[c];
  }
  return means;
}

double dist2(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

TEST_CASE("generate rejects invalid specs") {
  scda::Rng rng(1);
  scda::ShiftSpec spec;

  auto expect_reject = [&](auto&& tweak) {
    scda::ShiftSpec bad = spec;
    tweak(bad);
    CHECK_THROWS_AS(scda::generate(bad, rng), scda::ContractViolation);
  };

  expect_reject([](scda::ShiftSpec& s) { s.num_known = 0; });
  expect_reject([](scda::ShiftSpec& s) { s.num_implicit = -1; });
  expect_reject([](scda::ShiftSpec& s) { s.dim = 0; });
  expect_reject([](scda::ShiftSpec& s) { s.sigma = 0.0; });
  expect_reject([](scda::ShiftSpec& s) { s.center_range = 0.0; });
  expect_reject([](scda::ShiftSpec& s) { s.min_separation_sigmas = -1.0; });
  expect_reject([](scda::ShiftSpec& s) { s.center_dim = s.dim + 1; });
  expect_reject([](scda::ShiftSpec& s) { s.source_per_class = 0; });
  expect_reject([](scda::ShiftSpec& s) { s.target_per_class = 0; });
  expect_reject([](scda::ShiftSpec& s) { s.imbalance_ratio = 0.0; });
  expect_reject([](scda::ShiftSpec& s) { s.imbalance_ratio = 1.5; });
  expect_reject([](scda::ShiftSpec& s) { s.translation = {1.0, 2.0}; });  // dim is 6
}

TEST_CASE("generate is deterministic per seed and distinct across seeds") {
  scda::ShiftSpec spec;
  scda::Rng a(42), b(42), c(43);
  scda::GeneratedPair p1 = scda::generate(spec, a);
  scda::GeneratedPair p2 = scda::generate(spec, b);
  scda::GeneratedPair p3 = scda::generate(spec, c);

  CHECK(p1.source.features.values() == p2.source.features.values());
  CHECK(p1.source.labels == p2.source.labels);
  CHECK(p1.target.features().values() == p2.target.features().values());
  CHECK(scda::eval::detail::ground_truth(p1.target) ==
        scda::eval::detail::ground_truth(p2.target));

  CHECK(p1.source.features.values() != p3.source.features.values());
  CHECK(p1.target.features().values() != p3.target.features().values());
}

TEST_CASE("generate default benchmark shape") {
  scda::ShiftSpec spec;
  scda::Rng rng(7);
  scda::GeneratedPair pair = scda::generate(spec, rng);

  CHECK(pair.source.features.rows() == 400);
  CHECK(pair.source.features.cols() == 6);
  CHECK(pair.source.num_classes == 4);
  CHECK(pair.target.size() == 700);
  CHECK(pair.target.dim() == 6);
  CHECK(pair.target.has_ground_truth());

  for (int label : pair.source.labels) {
    CHECK(label >= 0);
    CHECK(label < 4);
  }
  const std::vector<int>& gt = scda::eval::detail::ground_truth(pair.target);
  std::vector<int> gt_counts(7, 0);
  for (int g : gt) {
    REQUIRE(g >= 0);
    REQUIRE(g < 7);
    ++gt_counts[g];
  }
  for (int c = 0; c < 7; ++c) CHECK(gt_counts[c] == 100);

  CHECK(pair.target.pseudo_labels() ==
        std::vector<int>(static_cast<std::size_t>(pair.target.size()), -1));
  CHECK(pair.source.features.all_finite());
  CHECK(pair.target.features().all_finite());
}

TEST_CASE("source blobs are pure under the nearest-class-mean rule") {
  scda::ShiftSpec spec;
  scda::Rng rng(11);
  scda::GeneratedPair pair = scda::generate(spec, rng);
  scda::Matrix means =
      class_means(pair.source.features, pair.source.labels, pair.source.num_classes);

  int hits = 0;
  for (int i = 0; i < pair.source.features.rows(); ++i) {
    int best = 0;
    double best_d = dist2(pair.source.features.row(i), means.row(0));
    for (int c = 1; c < pair.source.num_classes; ++c) {
      double d = dist2(pair.source.features.row(i), means.row(c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == pair.source.labels[i]) ++hits;
  }
  CHECK(hits >= static_cast<int>(0.99 * pair.source.features.rows()));
}

TEST_CASE("target applies the configured affine shift") {
  SUBCASE("identity shift keeps known-class means in place") {
    scda::ShiftSpec spec;
    spec.rotation_angle = 0.0;
    spec.shift_scale = 1.0;
    spec.sigma = 0.05;
    spec.min_separation_sigmas = 6.0;
    spec.source_per_class = 200;
    spec.target_per_class = 200;
    scda::Rng rng(3);
    scda::GeneratedPair pair = scda::generate(spec, rng);

    scda::Matrix src_means =
        class_means(pair.source.features, pair.source.labels, spec.num_known);
    scda::Matrix tgt_means = class_means(
        pair.target.features(), scda::eval::detail::ground_truth(pair.target),
        spec.num_known + spec.num_implicit);
    for (int c = 0; c < spec.num_known; ++c)
      CHECK(std::sqrt(dist2(src_means.row(c), tgt_means.row(c))) < 0.05);
  }

  SUBCASE("quarter-turn rotation with scale and broadcast translation") {
    scda::ShiftSpec spec;
    spec.num_known = 3;
    spec.num_implicit = 0;
    spec.dim = 2;
    spec.sigma = 0.05;
    spec.rotation_angle = std::acos(-1.0) / 2.0;
    spec.shift_scale = 2.0;
    spec.translation = {1.0};
    spec.source_per_class = 200;
    spec.target_per_class = 200;
    scda::Rng rng(5);
    scda::GeneratedPair pair = scda::generate(spec, rng);

    scda::Matrix src_means =
        class_means(pair.source.features, pair.source.labels, spec.num_known);
    scda::Matrix tgt_means = class_means(
        pair.target.features(), scda::eval::detail::ground_truth(pair.target),
        spec.num_known);
    for (int c = 0; c < spec.num_known; ++c) {
      const double x = src_means.at(c, 0), y = src_means.at(c, 1);
      CHECK(std::abs(tgt_means.at(c, 0) - (2.0 * -y + 1.0)) < 0.05);
      CHECK(std::abs(tgt_means.at(c, 1) - (2.0 * x + 1.0)) < 0.05);
    }
  }
}

TEST_CASE("closed-set spec yields only known ground truth") {
  scda::ShiftSpec spec;
  spec.num_implicit = 0;
  scda::Rng rng(9);
  scda::GeneratedPair pair = scda::generate(spec, rng);
  CHECK(pair.target.size() == 400);
  for (int g : scda::eval::detail::ground_truth(pair.target))
    CHECK(g < spec.num_known);
}

TEST_CASE("imbalance shrinks a quarter of the classes consistently") {
  scda::ShiftSpec spec;
  spec.imbalance_ratio = 0.2;
  scda::Rng rng(13);
  scda::GeneratedPair pair = scda::generate(spec, rng);

  const std::vector<int>& gt = scda::eval::detail::ground_truth(pair.target);
  std::map<int, int> tgt_counts;
  for (int g : gt) ++tgt_counts[g];
  std::map<int, int> src_counts;
  for (int l : pair.source.labels) ++src_counts[l];

  int shrunk = 0;
  for (const auto& [cls, count] : tgt_counts) {
    CHECK((count == 100 || count == 20));
    if (count == 20) ++shrunk;
  }
  CHECK(shrunk == 2);  // ceil(7 / 4)

  // Known classes shrink identically on both sides of the domain shift.
  for (int c = 0; c < spec.num_known; ++c) CHECK(src_counts[c] == tgt_counts[c]);
}

TEST_CASE("center sampling gives up on impossible separation") {
  scda::ShiftSpec spec;
  spec.num_known = 2;
  spec.num_implicit = 0;
  spec.center_range = 0.5;
  spec.min_separation_sigmas = 6.0;
  scda::Rng rng(1);
  CHECK_THROWS_AS(scda::generate(spec, rng), scda::GeneratorError);
}

TEST_CASE("labeled csv round-trips bit-exactly") {
  scda::ShiftSpec spec;
  spec.num_known = 3;
  spec.num_implicit = 1;
  spec.source_per_class = 5;
  spec.target_per_class = 4;
  scda::Rng rng(17);
  scda::GeneratedPair pair = scda::generate(spec, rng);

  const std::string path = tmp_path("source.csv");
  scda::save_csv(path, pair.source);
  scda::LabeledSet loaded = scda::load_labeled_csv(path);

  CHECK(loaded.features.values() == pair.source.features.values());
  CHECK(loaded.labels == pair.source.labels);
  CHECK(loaded.num_classes == 3);

  const std::string again = tmp_path("source2.csv");
  scda::save_csv(again, loaded);
  CHECK(read_file(path) == read_file(again));
}

TEST_CASE("target csv keeps pseudo labels and hidden ground truth") {
  scda::ShiftSpec spec;
  spec.num_known = 2;
  spec.num_implicit = 2;
  spec.source_per_class = 3;
  spec.target_per_class = 3;
  scda::Rng rng(19);
  scda::GeneratedPair pair = scda::generate(spec, rng);
  pair.target.pseudo_labels()[0] = 2;
  pair.target.pseudo_labels()[1] = 0;

  const std::string path = tmp_path("target.csv");
  scda::save_csv(path, pair.target);

  scda::TargetSet loaded = scda::load_target_csv(path);
  CHECK(loaded.features().values() == pair.target.features().values());
  CHECK(loaded.pseudo_labels() == pair.target.pseudo_labels());
  CHECK(loaded.has_ground_truth());
  CHECK(scda::eval::detail::ground_truth(loaded) ==
        scda::eval::detail::ground_truth(pair.target));

  const std::string again = tmp_path("target2.csv");
  scda::save_csv(again, loaded);
  CHECK(read_file(path) == read_file(again));

  SUBCASE("header includes gt only when ground truth exists") {
    const std::string text = read_file(path);
    CHECK(text.substr(0, text.find('\n')) == "f0,f1,f2,f3,f4,f5,label,gt");

    scda::TargetSet bare(pair.target.features(), {});
    const std::string bare_path = tmp_path("target_bare.csv");
    scda::save_csv(bare_path, bare);
    scda::TargetSet reloaded = scda::load_target_csv(bare_path);
    CHECK_FALSE(reloaded.has_ground_truth());
    CHECK(reloaded.pseudo_labels() == bare.pseudo_labels());
  }
}

TEST_CASE("csv loader reports precise failures") {
  auto load_text = [&](const std::string& name, const std::string& text) {
    const std::string path = tmp_path(name);
    write_file(path, text);
    return path;
  };

  CHECK_THROWS_AS(scda::load_labeled_csv(tmp_path("missing_nope.csv")),
                  scda::IoError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(load_text("empty.csv", "")),
      doctest::Contains("line 1"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(load_text("badheader.csv", "x0,x1,label\n1,2,0\n")),
      doctest::Contains("header"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(
          load_text("extracol.csv", "f0,f1,label,gt,extra\n1,2,0,0,0\n")),
      doctest::Contains("unknown column 'extra'"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(
          load_text("unkcol.csv", "f0,f1,label,confidence\n1,2,0,0.5\n")),
      doctest::Contains("unknown column 'confidence'"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(load_text("headeronly.csv", "f0,label\n")),
      doctest::Contains("no data rows"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(
          load_text("ragged.csv", "f0,f1,label\n1,2,0\n1,2\n1,2,1\n")),
      doctest::Contains("line 3"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(
          load_text("nonnum.csv", "f0,f1,label\n1,2,0\n1,abc,1\n")),
      doctest::Contains("non-numeric cell 'abc'"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(
          load_text("neglabel.csv", "f0,label\n1,0\n2,-1\n")),
      doctest::Contains("line 3"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_labeled_csv(load_text("gap.csv", "f0,label\n1,0\n2,2\n")),
      doctest::Contains("class 1"), scda::ParseError);

  CHECK_THROWS_WITH_AS(
      scda::load_target_csv(load_text("badgt.csv", "f0,label,gt\n1,-1,-2\n")),
      doctest::Contains("gt"), scda::ParseError);

  // Pseudo label -1 is legal in target files, illegal in source files.
  scda::TargetSet ok = scda::load_target_csv(
      load_text("okpseudo.csv", "f0,label,gt\n1,-1,0\n2,1,1\n"));
  CHECK(ok.pseudo_labels() == std::vector<int>{-1, 1});
}

TEST_CASE("batches partition an epoch with a minimum batch of two") {
  scda::Rng rng(23);

  SUBCASE("exact and ragged splits") {
    auto b1 = scda::batches(10, 4, rng);
    REQUIRE(b1.size() == 3);
    CHECK(b1[0].size() == 4);
    CHECK(b1[1].size() == 4);
    CHECK(b1[2].size() == 2);

    auto b2 = scda::batches(4, 4, rng);
    REQUIRE(b2.size() == 1);
    CHECK(b2[0].size() == 4);

    auto b3 = scda::batches(5, 4, rng);  // final singleton dropped
    REQUIRE(b3.size() == 1);
    CHECK(b3[0].size() == 4);
  }

  SUBCASE("batches cover [0, n) without repeats") {
    auto bs = scda::batches(10, 4, rng);
    std::vector<int> all;
    for (const auto& b : bs)
      for (int i : b) all.push_back(i);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  }

  SUBCASE("same rng state, same batches") {
    scda::Rng r1(99), r2(99);
    CHECK(scda::batches(20, 8, r1) == scda::batches(20, 8, r2));
  }

  SUBCASE("degenerate sizes") {
    CHECK(scda::batches(1, 2, rng).empty());
    CHECK_THROWS_AS(scda::batches(10, 1, rng), scda::ContractViolation);
  }
}
