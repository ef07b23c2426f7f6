#pragma once

#include <cstdint>

// Dense inner-loop kernels. Every kernel exists twice: a serial reference
// under kernels::reference and an OpenMP version under kernels::omp that
// partitions work so each output element is computed with the same
// floating-point operation order as the reference. The two variants are
// therefore bit-identical for any thread count, which keeps the whole
// pipeline deterministic. The unqualified functions dispatch by problem
// size (tiny problems skip the parallel region).
//
// tools/scda_bench compares the two variants for speed and equality.

namespace scda::kernels {

namespace reference {

// out(ar x bc) = a(ar x ac) * b(ac x bc), all row-major.
void matmul(const double* a, int ar, int ac, const double* b, int bc, double* out);

// out(ac x bc) = a^T * b where a is (ar x ac), b is (ar x bc).
void matmul_at_b(const double* a, int ar, int ac, const double* b, int bc, double* out);

// out(ar x br) = a * b^T where a is (ar x ac), b is (br x ac).
void matmul_a_bt(const double* a, int ar, int ac, const double* b, int br, double* out);

// For each of n points (d-dim, row-major) find the nearest of k centroids
// by squared Euclidean distance; ties resolve to the lowest centroid index.
// Writes the centroid index into assign[i] and the distance into dist2[i].
void nearest_centroids(const double* points, int n, int d, const double* centroids,
                       int k, int* assign, double* dist2);

// Per-cluster coordinate sums and member counts. sums is (k x d) row-major,
// counts has length k; both are overwritten. Members are accumulated in
// ascending point order within each cluster.
void centroid_sums(const double* points, int n, int d, const int* assign, int k,
                   double* sums, int* counts);

}  // namespace reference

namespace omp {

void matmul(const double* a, int ar, int ac, const double* b, int bc, double* out);
void matmul_at_b(const double* a, int ar, int ac, const double* b, int bc, double* out);
void matmul_a_bt(const double* a, int ar, int ac, const double* b, int br, double* out);
void nearest_centroids(const double* points, int n, int d, const double* centroids,
                       int k, int* assign, double* dist2);
void centroid_sums(const double* points, int n, int d, const int* assign, int k,
                   double* sums, int* counts);

}  // namespace omp

// Size-dispatching entry points used by the rest of the library.
void matmul(const double* a, int ar, int ac, const double* b, int bc, double* out);
void matmul_at_b(const double* a, int ar, int ac, const double* b, int bc, double* out);
void matmul_a_bt(const double* a, int ar, int ac, const double* b, int br, double* out);
void nearest_centroids(const double* points, int n, int d, const double* centroids,
                       int k, int* assign, double* dist2);
void centroid_sums(const double* points, int n, int d, const int* assign, int k,
                   double* sums, int* counts);

}  // namespace scda::kernels
