#include "scda/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scda::kernels {

namespace reference {

void matmul(const double* a, int ar, int ac, const double* b, int bc, double* out) {
  for (int i = 0; i < ar; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * ac;
    double* orow = out + static_cast<std::size_t>(i) * bc;
    for (int j = 0; j < bc; ++j) {
      double acc = 0.0;
      for (int k = 0; k < ac; ++k) acc += arow[k] * b[static_cast<std::size_t>(k) * bc + j];
      orow[j] = acc;
    }
  }
}

void matmul_at_b(const double* a, int ar, int ac, const double* b, int bc, double* out) {
  for (int i = 0; i < ac; ++i) {
    double* orow = out + static_cast<std::size_t>(i) * bc;
    for (int j = 0; j < bc; ++j) {
      double acc = 0.0;
      for (int k = 0; k < ar; ++k)
        acc += a[static_cast<std::size_t>(k) * ac + i] * b[static_cast<std::size_t>(k) * bc + j];
      orow[j] = acc;
    }
  }
}

void matmul_a_bt(const double* a, int ar, int ac, const double* b, int br, double* out) {
  for (int i = 0; i < ar; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * ac;
    double* orow = out + static_cast<std::size_t>(i) * br;
    for (int j = 0; j < br; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * ac;
      double acc = 0.0;
      for (int k = 0; k < ac; ++k) acc += arow[k] * brow[k];
      orow[j] = acc;
    }
  }
}

void nearest_centroids(const double* points, int n, int d, const double* centroids,
                       int k, int* assign, double* dist2) {
  for (int i = 0; i < n; ++i) {
    const double* p = points + static_cast<std::size_t>(i) * d;
    int best = 0;
    double best_d2 = 0.0;
    for (int c = 0; c < k; ++c) {
      const double* ctr = centroids + static_cast<std::size_t>(c) * d;
      double acc = 0.0;
      for (int j = 0; j < d; ++j) {
        const double diff = p[j] - ctr[j];
        acc += diff * diff;
      }
      if (c == 0 || acc < best_d2) {
        best = c;
        best_d2 = acc;
      }
    }
    assign[i] = best;
    dist2[i] = best_d2;
  }
}

void centroid_sums(const double* points, int n, int d, const int* assign, int k,
                   double* sums, int* counts) {
  for (int c = 0; c < k; ++c) {
    double* srow = sums + static_cast<std::size_t>(c) * d;
    for (int j = 0; j < d; ++j) srow[j] = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (assign[i] != c) continue;
      const double* p = points + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) srow[j] += p[j];
      ++count;
    }
    counts[c] = count;
  }
}

}  // namespace reference

namespace omp {

// Each parallel loop partitions over disjoint output rows/elements and keeps
// the reference accumulation order per element, so results match the serial
// variant exactly.

void matmul(const double* a, int ar, int ac, const double* b, int bc, double* out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < ar; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * ac;
    double* orow = out + static_cast<std::size_t>(i) * bc;
    for (int j = 0; j < bc; ++j) {
      double acc = 0.0;
      for (int k = 0; k < ac; ++k) acc += arow[k] * b[static_cast<std::size_t>(k) * bc + j];
      orow[j] = acc;
    }
  }
}

void matmul_at_b(const double* a, int ar, int ac, const double* b, int bc, double* out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < ac; ++i) {
    double* orow = out + static_cast<std::size_t>(i) * bc;
    for (int j = 0; j < bc; ++j) {
      double acc = 0.0;
      for (int k = 0; k < ar; ++k)
        acc += a[static_cast<std::size_t>(k) * ac + i] * b[static_cast<std::size_t>(k) * bc + j];
      orow[j] = acc;
    }
  }
}

void matmul_a_bt(const double* a, int ar, int ac, const double* b, int br, double* out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < ar; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * ac;
    double* orow = out + static_cast<std::size_t>(i) * br;
    for (int j = 0; j < br; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * ac;
      double acc = 0.0;
      for (int k = 0; k < ac; ++k) acc += arow[k] * brow[k];
      orow[j] = acc;
    }
  }
}

void nearest_centroids(const double* points, int n, int d, const double* centroids,
                       int k, int* assign, double* dist2) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* p = points + static_cast<std::size_t>(i) * d;
    int best = 0;
    double best_d2 = 0.0;
    for (int c = 0; c < k; ++c) {
      const double* ctr = centroids + static_cast<std::size_t>(c) * d;
      double acc = 0.0;
      for (int j = 0; j < d; ++j) {
        const double diff = p[j] - ctr[j];
        acc += diff * diff;
      }
      if (c == 0 || acc < best_d2) {
        best = c;
        best_d2 = acc;
      }
    }
    assign[i] = best;
    dist2[i] = best_d2;
  }
}

void centroid_sums(const double* points, int n, int d, const int* assign, int k,
                   double* sums, int* counts) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < k; ++c) {
    double* srow = sums + static_cast<std::size_t>(c) * d;
    for (int j = 0; j < d; ++j) srow[j] = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (assign[i] != c) continue;
      const double* p = points + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) srow[j] += p[j];
      ++count;
    }
    counts[c] = count;
  }
}

}  // namespace omp

namespace {

// Below this many inner-loop operations the parallel region costs more than
// it saves.
constexpr long long kParallelThreshold = 1 << 16;

inline bool use_parallel(long long work) {
#ifdef _OPENMP
  return work >= kParallelThreshold && omp_get_max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}

}  // namespace

void matmul(const double* a, int ar, int ac, const double* b, int bc, double* out) {
  if (use_parallel(1LL * ar * ac * bc))
    omp::matmul(a, ar, ac, b, bc, out);
  else
    reference::matmul(a, ar, ac, b, bc, out);
}

void matmul_at_b(const double* a, int ar, int ac, const double* b, int bc, double* out) {
  if (use_parallel(1LL * ar * ac * bc))
    omp::matmul_at_b(a, ar, ac, b, bc, out);
  else
    reference::matmul_at_b(a, ar, ac, b, bc, out);
}

void matmul_a_bt(const double* a, int ar, int ac, const double* b, int br, double* out) {
  if (use_parallel(1LL * ar * ac * br))
    omp::matmul_a_bt(a, ar, ac, b, br, out);
  else
    reference::matmul_a_bt(a, ar, ac, b, br, out);
}

void nearest_centroids(const double* points, int n, int d, const double* centroids,
                       int k, int* assign, double* dist2) {
  if (use_parallel(1LL * n * d * k))
    omp::nearest_centroids(points, n, d, centroids, k, assign, dist2);
  else
    reference::nearest_centroids(points, n, d, centroids, k, assign, dist2);
}

void centroid_sums(const double* points, int n, int d, const int* assign, int k,
                   double* sums, int* counts) {
  if (use_parallel(1LL * n * d))
    omp::centroid_sums(points, n, d, assign, k, sums, counts);
  else
    reference::centroid_sums(points, n, d, assign, k, sums, counts);
}

}  // namespace scda::kernels
