#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "scda/error.hpp"
#include "scda/kernels.hpp"
#include "scda/matrix.hpp"
#include "scda/pca.hpp"
#include "scda/rng.hpp"

using scda::Matrix;

namespace {

Matrix random_matrix(int rows, int cols, scda::Rng& rng, double lo = -2.0,
                     double hi = 2.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST_CASE("matrix basics") {
  Matrix id = Matrix::identity(3);
  CHECK_EQ(id.at(0, 0), 1.0);
  CHECK_EQ(id.at(0, 1), 0.0);
  CHECK_EQ(id.rows(), 3);

  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix t = scda::transpose(a);
  CHECK_EQ(t.rows(), 3);
  CHECK_EQ(t.at(0, 1), 4.0);
  CHECK_EQ(t.at(2, 0), 3.0);

  Matrix b(1, 3, {7, 8, 9});
  Matrix v = scda::vstack(a, b);
  CHECK_EQ(v.rows(), 3);
  CHECK_EQ(v.at(2, 2), 9.0);
  CHECK_THROWS_AS(scda::vstack(a, Matrix(1, 2)), scda::ShapeError);

  std::vector<int> idx = {2, 0};
  Matrix picked = scda::take_rows(v, idx);
  CHECK_EQ(picked.at(0, 0), 7.0);
  CHECK_EQ(picked.at(1, 0), 1.0);
  std::vector<int> bad = {3};
  CHECK_THROWS_AS(scda::take_rows(v, bad), scda::ContractViolation);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  std::vector<double> v = {1.0, 3.0, 3.0, 2.0};
  CHECK_EQ(scda::argmax(v), 1);
  std::vector<double> w = {5.0, 5.0};
  CHECK_EQ(scda::argmax(w), 0);
}

TEST_CASE("require_finite flags NaN and infinity") {
  Matrix m(2, 2, {1, 2, 3, 4});
  CHECK(m.all_finite());
  scda::require_finite(m, "clean");
  m.at(1, 1) = std::nan("");
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS_AS(scda::require_finite(m, "poisoned"), scda::NumericalError);
}

TEST_CASE("matmul family matches the naive oracle") {
  scda::Rng rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 1 + static_cast<int>(rng.next_below(17));
    const int k = 1 + static_cast<int>(rng.next_below(17));
    const int n = 1 + static_cast<int>(rng.next_below(17));
    Matrix a = random_matrix(m, k, rng);
    Matrix b = random_matrix(k, n, rng);

    Matrix got = scda::matmul(a, b);
    Matrix want = oracles::naive_matmul(a, b);
    for (int i = 0; i < m * n; ++i)
      CHECK(got.values()[i] == doctest::Approx(want.values()[i]).epsilon(1e-12));

    Matrix at = scda::transpose(a);
    Matrix got_atb = scda::matmul_transpose_a(a, scda::matmul(a, b));
    Matrix want_atb = oracles::naive_matmul(at, scda::matmul(a, b));
    for (int i = 0; i < k * n; ++i)
      CHECK(got_atb.values()[i] ==
            doctest::Approx(want_atb.values()[i]).epsilon(1e-12));

    Matrix bt = scda::transpose(b);
    Matrix got_abt = scda::matmul_transpose_b(a, bt);
    Matrix want_abt = oracles::naive_matmul(a, b);
    for (int i = 0; i < m * n; ++i)
      CHECK(got_abt.values()[i] ==
            doctest::Approx(want_abt.values()[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(scda::matmul(Matrix(2, 3), Matrix(2, 3)), scda::ShapeError);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  scda::Rng rng(23);
  // Sizes straddling the dispatch threshold.
  const int sizes[][3] = {{7, 5, 3}, {40, 30, 20}, {90, 70, 60}};
  for (const auto& s : sizes) {
    const int m = s[0], k = s[1], n = s[2];
    Matrix a = random_matrix(m, k, rng);
    Matrix b = random_matrix(k, n, rng);
    std::vector<double> ref(static_cast<std::size_t>(m) * n);
    std::vector<double> par(ref.size());
    scda::kernels::reference::matmul(a.data(), m, k, b.data(), n, ref.data());
    scda::kernels::omp::matmul(a.data(), m, k, b.data(), n, par.data());
    CHECK_EQ(std::memcmp(ref.data(), par.data(), ref.size() * sizeof(double)),
             0);

    std::vector<double> ref2(static_cast<std::size_t>(k) * k);
    std::vector<double> par2(ref2.size());
    scda::kernels::reference::matmul_at_b(a.data(), m, k, a.data(), k,
                                          ref2.data());
    scda::kernels::omp::matmul_at_b(a.data(), m, k, a.data(), k, par2.data());
    CHECK_EQ(std::memcmp(ref2.data(), par2.data(), ref2.size() * sizeof(double)),
             0);

    std::vector<double> ref3(static_cast<std::size_t>(m) * m);
    std::vector<double> par3(ref3.size());
    scda::kernels::reference::matmul_a_bt(a.data(), m, k, a.data(), m,
                                          ref3.data());
    scda::kernels::omp::matmul_a_bt(a.data(), m, k, a.data(), m, par3.data());
    CHECK_EQ(std::memcmp(ref3.data(), par3.data(), ref3.size() * sizeof(double)),
             0);
  }
}

TEST_CASE("nearest_centroids picks the lowest index on ties") {
  const double points[] = {0.0, 0.0};
  const double centroids[] = {-1.0, 0.0, 1.0, 0.0};
  int assign = -1;
  double d2 = -1.0;
  scda::kernels::nearest_centroids(points, 1, 2, centroids, 2, &assign, &d2);
  CHECK_EQ(assign, 0);
  CHECK_EQ(d2, 1.0);
}

TEST_CASE("centroid_sums accumulates per cluster, serial == parallel") {
  scda::Rng rng(31);
  const int n = 50, d = 4, k = 5;
  Matrix pts = random_matrix(n, d, rng);
  std::vector<int> assign(n);
  for (int i = 0; i < n; ++i)
    assign[i] = static_cast<int>(rng.next_below(k - 1));  // cluster k-1 empty

  std::vector<double> sums_ref(static_cast<std::size_t>(k) * d);
  std::vector<double> sums_par(sums_ref.size());
  std::vector<int> counts_ref(k), counts_par(k);
  scda::kernels::reference::centroid_sums(pts.data(), n, d, assign.data(), k,
                                          sums_ref.data(), counts_ref.data());
  scda::kernels::omp::centroid_sums(pts.data(), n, d, assign.data(), k,
                                    sums_par.data(), counts_par.data());
  CHECK_EQ(std::memcmp(sums_ref.data(), sums_par.data(),
                       sums_ref.size() * sizeof(double)),
           0);
  CHECK(counts_ref == counts_par);
  CHECK_EQ(counts_ref[k - 1], 0);
  CHECK_EQ(sums_ref[static_cast<std::size_t>(k - 1) * d], 0.0);

  // Hand accumulation for cluster 0.
  std::vector<double> hand(d, 0.0);
  int hand_count = 0;
  for (int i = 0; i < n; ++i) {
    if (assign[i] != 0) continue;
    ++hand_count;
    for (int j = 0; j < d; ++j) hand[j] += pts.at(i, j);
  }
  CHECK_EQ(hand_count, counts_ref[0]);
  for (int j = 0; j < d; ++j)
    CHECK(sums_ref[j] == doctest::Approx(hand[j]).epsilon(1e-12));
}

TEST_CASE("rng streams are reproducible") {
  scda::Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    all_equal = all_equal && x == b.next_u64();
    any_diff = any_diff || x != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("fork depends only on seed and salt, not on consumption") {
  scda::Rng a(42);
  for (int i = 0; i < 10; ++i) a.next_u64();
  scda::Rng fresh(42);
  CHECK_EQ(a.fork(7).next_u64(), fresh.fork(7).next_u64());
  CHECK(a.fork(7).next_u64() != a.fork(8).next_u64());
}

TEST_CASE("next_double and next_below stay in range") {
  scda::Rng rng(7);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.next_double();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    mean += x;
  }
  CHECK(std::abs(mean / 10000 - 0.5) < 0.02);

  std::vector<int> seen(7, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.next_below(7);
    CHECK(v < 7);
    ++seen[v];
  }
  for (int count : seen) CHECK(count > 1000);
  for (int i = 0; i < 100; ++i) CHECK_EQ(rng.next_below(1), 0);
  CHECK_THROWS_AS(rng.next_below(0), scda::ContractViolation);
}

TEST_CASE("gaussian moments are plausible") {
  scda::Rng rng(99);
  const int n = 20000;
  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    mean += g;
    sq += g * g;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  scda::Rng rng(5);
  rng.shuffle(v);
  std::vector<int> w(100);
  std::iota(w.begin(), w.end(), 0);
  scda::Rng rng2(5);
  rng2.shuffle(w);
  CHECK(v == w);
  CHECK(v != std::vector<int>(v.size(), 0));
  std::sort(v.begin(), v.end());
  std::vector<int> sorted(100);
  std::iota(sorted.begin(), sorted.end(), 0);
  CHECK(v == sorted);
}

TEST_CASE("symmetric_eigen recovers a planted spectrum") {
  scda::Rng rng(17);
  const int d = 6;
  // Random orthogonal Q by Gram-Schmidt on a gaussian matrix.
  Matrix q(d, d);
  for (double& v : q.values()) v = rng.next_gaussian();
  for (int j = 0; j < d; ++j) {
    for (int j2 = 0; j2 < j; ++j2) {
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += q.at(i, j) * q.at(i, j2);
      for (int i = 0; i < d; ++i) q.at(i, j) -= dot * q.at(i, j2);
    }
    double norm = 0.0;
    for (int i = 0; i < d; ++i) norm += q.at(i, j) * q.at(i, j);
    norm = std::sqrt(norm);
    for (int i = 0; i < d; ++i) q.at(i, j) /= norm;
  }
  const std::vector<double> planted = {9.0, 5.0, 2.5, 1.0, 0.3, 0.01};
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += q.at(i, k) * planted[k] * q.at(j, k);
      a.at(i, j) = acc;
    }

  std::vector<double> values;
  Matrix vectors;
  scda::symmetric_eigen(a, values, vectors);
  for (int k = 0; k < d; ++k) {
    CHECK(values[k] == doctest::Approx(planted[k]).epsilon(1e-9));
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += vectors.at(i, k) * q.at(i, k);
    CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK_THROWS_AS(scda::symmetric_eigen(Matrix(2, 3), values, vectors),
                  scda::ShapeError);
}

TEST_CASE("pca eigenvalues equal projected variances") {
  scda::Rng rng(29);
  const int n = 200, d = 6;
  Matrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      x.at(i, j) = rng.next_gaussian() * (j + 1) + 0.5 * j;

  scda::PcaTransform t = scda::fit_pca(x, d);
  CHECK_EQ(t.d_out, d);
  CHECK_FALSE(t.zero_variance);

  // Components orthonormal.
  for (int j = 0; j < d; ++j)
    for (int j2 = j; j2 < d; ++j2) {
      double dot = 0.0;
      for (int i = 0; i < d; ++i)
        dot += t.components.at(i, j) * t.components.at(i, j2);
      CHECK(dot == doctest::Approx(j == j2 ? 1.0 : 0.0).epsilon(1e-9));
    }

  // Eigenvalues descending.
  for (int j = 1; j < d; ++j) CHECK(t.eigenvalues[j - 1] >= t.eigenvalues[j]);

  // Variance of each projected coordinate equals its eigenvalue, and the
  // projected coordinates are uncorrelated.
  Matrix proj = scda::apply_pca(t, x);
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += proj.at(i, j);
    mean /= n;
    CHECK(std::abs(mean) < 1e-9);  // centering removed the mean
    for (int j2 = j; j2 < d; ++j2) {
      double cov = 0.0;
      for (int i = 0; i < n; ++i) cov += proj.at(i, j) * proj.at(i, j2);
      cov /= n - 1;
      const double want = j == j2 ? t.eigenvalues[j] : 0.0;
      CHECK(cov == doctest::Approx(want).epsilon(1e-8).scale(t.eigenvalues[0]));
    }
  }

  // Total variance is preserved.
  double trace = 0.0;
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x.at(i, j);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = x.at(i, j) - mean;
      var += c * c;
    }
    trace += var / (n - 1);
  }
  double sum = 0.0;
  for (double e : t.eigenvalues) sum += e;
  CHECK(sum == doctest::Approx(trace).epsilon(1e-9));

  // Sign convention: the largest-magnitude entry of each component is
  // positive.
  for (int j = 0; j < d; ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < d; ++i) {
      if (std::abs(t.components.at(i, j)) > best) {
        best = std::abs(t.components.at(i, j));
        arg = i;
      }
    }
    CHECK(t.components.at(arg, j) > 0.0);
  }

  // Truncation keeps the top of the spectrum.
  scda::PcaTransform t2 = scda::fit_pca(x, 2);
  CHECK_EQ(t2.d_out, 2);
  CHECK(t2.eigenvalues[0] == doctest::Approx(t.eigenvalues[0]).epsilon(1e-10));
  CHECK(t2.eigenvalues[1] == doctest::Approx(t.eigenvalues[1]).epsilon(1e-10));
}

TEST_CASE("pca degenerate inputs") {
  Matrix constant(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) constant.at(i, j) = 2.5;
  scda::PcaTransform t = scda::fit_pca(constant, 2);
  CHECK(t.zero_variance);
  Matrix proj = scda::apply_pca(t, constant);
  for (double v : proj.values()) CHECK(std::abs(v) < 1e-12);

  Matrix one_row(1, 3, {1.0, 2.0, 3.0});
  CHECK(scda::fit_pca(one_row, 2).zero_variance);

  CHECK_THROWS_AS(scda::fit_pca(constant, 0), scda::ContractViolation);
  CHECK_THROWS_AS(scda::fit_pca(Matrix(), 2), scda::ShapeError);
  CHECK_THROWS_AS(scda::apply_pca(t, Matrix(2, 9)), scda::ShapeError);
}
