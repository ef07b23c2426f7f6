#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "scda/kernels.hpp"
#include "scda/rng.hpp"

using Clock = std::chrono::steady_clock;
using scda::Rng;
namespace k = scda::kernels;

namespace {

std::vector<double> random_block(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (double& v : out) v = rng.uniform(-1.0, 1.0);
  return out;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = Clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() /
         reps;
}

bool report(const char* name, double serial_ms, double omp_ms, bool equal) {
  std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", name, serial_ms, omp_ms,
              serial_ms / omp_ms, equal ? "identical" : "MISMATCH");
  return equal;
}

}  // namespace

int main() {
  Rng rng(20240816);
  bool all_equal = true;

  std::printf("%-28s %10s %10s %9s  %s\n", "kernel", "serial ms", "omp ms",
              "speedup", "outputs");

  {
    const int n = 256;
    const auto a = random_block(static_cast<std::size_t>(n) * n, rng);
    const auto b = random_block(static_cast<std::size_t>(n) * n, rng);
    std::vector<double> out_s(static_cast<std::size_t>(n) * n);
    std::vector<double> out_p(out_s.size());
    const double t_s = time_ms(
        [&] { k::reference::matmul(a.data(), n, n, b.data(), n, out_s.data()); },
        5);
    const double t_p = time_ms(
        [&] { k::omp::matmul(a.data(), n, n, b.data(), n, out_p.data()); }, 5);
    all_equal &= report("matmul 256x256x256", t_s, t_p,
                        std::memcmp(out_s.data(), out_p.data(),
                                    out_s.size() * sizeof(double)) == 0);
  }
  {
    const int ar = 2048, ac = 64, bc = 96;
    const auto a = random_block(static_cast<std::size_t>(ar) * ac, rng);
    const auto b = random_block(static_cast<std::size_t>(ar) * bc, rng);
    std::vector<double> out_s(static_cast<std::size_t>(ac) * bc);
    std::vector<double> out_p(out_s.size());
    const double t_s = time_ms(
        [&] {
          k::reference::matmul_at_b(a.data(), ar, ac, b.data(), bc,
                                    out_s.data());
        },
        5);
    const double t_p = time_ms(
        [&] { k::omp::matmul_at_b(a.data(), ar, ac, b.data(), bc, out_p.data()); },
        5);
    all_equal &= report("matmul_at_b 2048x64x96", t_s, t_p,
                        std::memcmp(out_s.data(), out_p.data(),
                                    out_s.size() * sizeof(double)) == 0);
  }
  {
    const int ar = 512, ac = 128, br = 512;
    const auto a = random_block(static_cast<std::size_t>(ar) * ac, rng);
    const auto b = random_block(static_cast<std::size_t>(br) * ac, rng);
    std::vector<double> out_s(static_cast<std::size_t>(ar) * br);
    std::vector<double> out_p(out_s.size());
    const double t_s = time_ms(
        [&] {
          k::reference::matmul_a_bt(a.data(), ar, ac, b.data(), br,
                                    out_s.data());
        },
        5);
    const double t_p = time_ms(
        [&] { k::omp::matmul_a_bt(a.data(), ar, ac, b.data(), br, out_p.data()); },
        5);
    all_equal &= report("matmul_a_bt 512x128x512", t_s, t_p,
                        std::memcmp(out_s.data(), out_p.data(),
                                    out_s.size() * sizeof(double)) == 0);
  }
  {
    const int n = 40000, d = 16, kc = 12;
    const auto pts = random_block(static_cast<std::size_t>(n) * d, rng);
    const auto cen = random_block(static_cast<std::size_t>(kc) * d, rng);
    std::vector<int> as_s(n), as_p(n);
    std::vector<double> d2_s(n), d2_p(n);
    const double t_s = time_ms(
        [&] {
          k::reference::nearest_centroids(pts.data(), n, d, cen.data(), kc,
                                          as_s.data(), d2_s.data());
        },
        10);
    const double t_p = time_ms(
        [&] {
          k::omp::nearest_centroids(pts.data(), n, d, cen.data(), kc,
                                    as_p.data(), d2_p.data());
        },
        10);
    const bool equal =
        std::memcmp(as_s.data(), as_p.data(), as_s.size() * sizeof(int)) == 0 &&
        std::memcmp(d2_s.data(), d2_p.data(), d2_s.size() * sizeof(double)) == 0;
    all_equal &= report("nearest_centroids 40000x16", t_s, t_p, equal);

    std::vector<double> sums_s(static_cast<std::size_t>(kc) * d);
    std::vector<double> sums_p(sums_s.size());
    std::vector<int> cnt_s(kc), cnt_p(kc);
    const double u_s = time_ms(
        [&] {
          k::reference::centroid_sums(pts.data(), n, d, as_s.data(), kc,
                                      sums_s.data(), cnt_s.data());
        },
        10);
    const double u_p = time_ms(
        [&] {
          k::omp::centroid_sums(pts.data(), n, d, as_s.data(), kc,
                                sums_p.data(), cnt_p.data());
        },
        10);
    const bool sums_equal =
        std::memcmp(sums_s.data(), sums_p.data(),
                    sums_s.size() * sizeof(double)) == 0 &&
        std::memcmp(cnt_s.data(), cnt_p.data(), cnt_s.size() * sizeof(int)) == 0;
    all_equal &= report("centroid_sums 40000x16", u_s, u_p, sums_equal);
  }

  if (!all_equal) {
    std::fprintf(stderr, "kernel outputs diverged between variants\n");
    return 1;
  }
  return 0;
}
