#include "scda/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <utility>

#include "scda/error.hpp"
#include "scda/kernels.hpp"
#include "scda/losses.hpp"
#include "scda/pca.hpp"

namespace scda {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix seed_centroids(const Matrix& x, int k, Rng& rng) {
  const int n = x.rows();
  const int d = x.cols();
  Matrix centroids(k, d);
  std::vector<double> dist2(static_cast<std::size_t>(n), kInf);

  int first = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
  std::copy_n(x.row(first).data(), d, centroids.row(0).data());

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      const double* xi = x.row(i).data();
      const double* cc = centroids.row(c - 1).data();
      for (int j = 0; j < d; ++j) {
        double diff = xi[j] - cc[j];
        acc += diff * diff;
      }
      dist2[static_cast<std::size_t>(i)] =
          std::min(dist2[static_cast<std::size_t>(i)], acc);
      total += dist2[static_cast<std::size_t>(i)];
    }
    int pick;
    if (total > 0.0) {
      double r = rng.next_double() * total;
      double cum = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        cum += dist2[static_cast<std::size_t>(i)];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    } else {
      // Every point coincides with a chosen centroid; D^2 gives no signal.
      pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    }
    std::copy_n(x.row(pick).data(), d, centroids.row(c).data());
  }
  return centroids;
}

// Steals the globally farthest point from any cluster that can spare one.
// Returns whether any cluster had to be repopulated.
bool fix_empty_clusters(std::vector<int>& assign, std::vector<double>& dist2,
                        std::vector<int>& counts) {
  const int n = static_cast<int>(assign.size());
  const int k = static_cast<int>(counts.size());
  bool fixed = false;
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    int donor = -1;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      if (counts[assign[i]] < 2) continue;
      if (dist2[static_cast<std::size_t>(i)] > best) {
        best = dist2[static_cast<std::size_t>(i)];
        donor = i;
      }
    }
    if (donor < 0) throw ContractViolation("k-means: cannot repopulate empty cluster");
    --counts[assign[donor]];
    assign[donor] = c;
    counts[c] = 1;
    dist2[static_cast<std::size_t>(donor)] = 0.0;
    fixed = true;
  }
  return fixed;
}

Clustering lloyd_run(const Matrix& x, int k, Rng& rng, int max_iters) {
  const int n = x.rows();
  const int d = x.cols();
  Clustering out;
  out.k = k;
  out.centroids = seed_centroids(x, k, rng);
  out.assignment.assign(static_cast<std::size_t>(n), -1);

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist2(static_cast<std::size_t>(n), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  Matrix sums(k, d);

  for (int iter = 0; iter < max_iters; ++iter) {
    kernels::nearest_centroids(x.data(), n, d, out.centroids.data(), k,
                               assign.data(), dist2.data());
    double sse_now = 0.0;
    for (int i = 0; i < n; ++i) sse_now += dist2[static_cast<std::size_t>(i)];
    out.sse_trace.push_back(sse_now);
    bool changed = assign != out.assignment;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) ++counts[assign[i]];
    if (fix_empty_clusters(assign, dist2, counts)) {
      out.empty_fix_applied = true;
      changed = true;
    }
    out.assignment = assign;
    if (!changed) break;
    kernels::centroid_sums(x.data(), n, d, assign.data(), k, sums.data(),
                           counts.data());
    for (int c = 0; c < k; ++c) {
      double inv = 1.0 / counts[c];
      for (int j = 0; j < d; ++j) out.centroids.at(c, j) = sums.at(c, j) * inv;
    }
  }

  out.sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* xi = x.row(i).data();
    const double* cc = out.centroids.row(out.assignment[i]).data();
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      double diff = xi[j] - cc[j];
      acc += diff * diff;
    }
    out.sse += acc;
  }
  return out;
}

}  // namespace

Clustering kmeans_pp(const Matrix& x, int k, const Rng& rng, int restarts,
                     int max_iters) {
  if (x.empty()) throw ShapeError("kmeans_pp: empty input");
  if (k < 1) throw ContractViolation("kmeans_pp: k must be positive");
  if (k > x.rows()) throw ContractViolation("kmeans_pp: k exceeds point count");
  if (restarts < 1) throw ContractViolation("kmeans_pp: restarts must be positive");
  if (max_iters < 1) throw ContractViolation("kmeans_pp: max_iters must be positive");

  Clustering best;
  double best_sse = kInf;
  for (int r = 0; r < restarts; ++r) {
    Rng run_rng = rng.fork(static_cast<std::uint64_t>(r));
    Clustering cur = lloyd_run(x, k, run_rng, max_iters);
    if (cur.sse < best_sse) {
      best_sse = cur.sse;
      best = std::move(cur);
    }
  }
  return best;
}

CandidateSets select_candidates(const Mlp& f, const SoftmaxClassifier& c,
                                const TargetSet& target,
                                const DiscoveryConfig& cfg) {
  if (target.size() == 0) throw ShapeError("select_candidates: empty target set");
  if (cfg.pca_dim < 1) throw ContractViolation("select_candidates: pca_dim must be positive");

  ForwardResult out = forward(f, c, target.features());
  const int n = target.size();
  const int num_classes = c.out_dim();

  std::vector<int> label(static_cast<std::size_t>(n));
  std::vector<double> ent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    label[static_cast<std::size_t>(i)] = argmax(out.probs.row(i));
    ent[static_cast<std::size_t>(i)] = entropy(out.probs.row(i));
  }

  PcaTransform pt = fit_pca(out.features, std::min(cfg.pca_dim, out.features.cols()));
  Matrix reduced = apply_pca(pt, out.features);

  CandidateSets sets;
  sets.num_known = c.num_known;
  std::vector<int> members;
  for (int cls = 0; cls < num_classes; ++cls) {
    members.clear();
    for (int i = 0; i < n; ++i) {
      if (label[static_cast<std::size_t>(i)] == cls) members.push_back(i);
    }
    if (members.empty()) continue;
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      double ea = ent[static_cast<std::size_t>(a)];
      double eb = ent[static_cast<std::size_t>(b)];
      if (ea != eb) return ea < eb;
      return a < b;
    });
    int keep = (static_cast<int>(members.size()) + 1) / 2;
    for (int m = 0; m < keep; ++m) {
      if (cls < c.num_known) {
        sets.kn_indices.push_back(members[static_cast<std::size_t>(m)]);
        sets.kn_labels.push_back(cls);
      } else {
        sets.im_indices.push_back(members[static_cast<std::size_t>(m)]);
      }
    }
  }
  sets.kn_features = take_rows(reduced, sets.kn_indices);
  sets.im_features = take_rows(reduced, sets.im_indices);
  return sets;
}

AssignmentResult max_assignment(const Matrix& profit) {
  if (profit.empty()) throw ShapeError("max_assignment: empty profit matrix");
  require_finite(profit, "max_assignment");

  const int nr = profit.rows();
  const int nc = profit.cols();
  const int n = std::max(nr, nc);

  double top = 0.0;
  for (double v : profit.values()) top = std::max(top, v);

  // Square cost matrix: minimizing (top - profit) maximizes total profit;
  // padded cells cost `top` (profit zero).
  Matrix cost(n, n);
  cost.fill(top);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) cost.at(i, j) = top - profit.at(i, j);

  // Hungarian algorithm with row/column potentials, O(n^3). p[j] is the row
  // currently matched to column j; index 0 is a virtual slot (1-based).
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost.at(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                     v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentResult res;
  res.row_to_col.assign(static_cast<std::size_t>(nr), -1);
  for (int j = 1; j <= n; ++j) {
    int i = p[static_cast<std::size_t>(j)];
    if (i >= 1 && i <= nr && j <= nc) {
      res.row_to_col[static_cast<std::size_t>(i - 1)] = j - 1;
      res.profit += profit.at(i - 1, j - 1);
    }
  }
  return res;
}

double clustering_accuracy(std::span<const int> clusters,
                           std::span<const int> labels, int num_clusters,
                           int num_labels) {
  if (clusters.size() != labels.size())
    throw ShapeError("clustering_accuracy: length mismatch");
  if (clusters.empty())
    throw ContractViolation("clustering_accuracy: empty point set");
  if (num_clusters < 1 || num_labels < 1)
    throw ContractViolation("clustering_accuracy: counts must be positive");

  Matrix cooc(num_clusters, num_labels);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    int c = clusters[i];
    int l = labels[i];
    if (c < 0 || c >= num_clusters)
      throw ContractViolation("clustering_accuracy: cluster id out of range");
    if (l < 0 || l >= num_labels)
      throw ContractViolation("clustering_accuracy: label out of range");
    cooc.at(c, l) += 1.0;
  }
  return max_assignment(cooc).profit / static_cast<double>(clusters.size());
}

ElbowResult elbow_k(std::span<const int> ks, std::span<const double> sses,
                    double sensitivity) {
  if (ks.size() != sses.size()) throw ShapeError("elbow_k: length mismatch");
  const int n = static_cast<int>(ks.size());
  if (n < 4) throw ContractViolation("elbow_k: need at least 4 sweep points");
  for (int i = 1; i < n; ++i) {
    if (ks[static_cast<std::size_t>(i)] <= ks[static_cast<std::size_t>(i - 1)])
      throw ContractViolation("elbow_k: ks must be strictly increasing");
  }

  double ymin = kInf, ymax = -kInf;
  for (double s : sses) {
    ymin = std::min(ymin, s);
    ymax = std::max(ymax, s);
  }
  if (!(ymax > ymin)) return {};  // flat curve carries no knee

  const double x0 = static_cast<double>(ks[0]);
  const double xr = static_cast<double>(ks[static_cast<std::size_t>(n - 1)]) - x0;
  std::vector<double> xn(static_cast<std::size_t>(n));
  std::vector<double> ydiff(static_cast<std::size_t>(n));
  double mean_dx = 0.0;
  for (int i = 0; i < n; ++i) {
    xn[static_cast<std::size_t>(i)] =
        (static_cast<double>(ks[static_cast<std::size_t>(i)]) - x0) / xr;
    double yn = (sses[static_cast<std::size_t>(i)] - ymin) / (ymax - ymin);
    ydiff[static_cast<std::size_t>(i)] = (1.0 - yn) - xn[static_cast<std::size_t>(i)];
  }
  for (int i = 1; i < n; ++i)
    mean_dx += xn[static_cast<std::size_t>(i)] - xn[static_cast<std::size_t>(i - 1)];
  mean_dx /= static_cast<double>(n - 1);

  int best = -1;
  for (int i = 1; i + 1 < n; ++i) {
    if (best < 0 || ydiff[static_cast<std::size_t>(i)] > ydiff[static_cast<std::size_t>(best)])
      best = i;
  }
  if (best < 0) return {};
  if (ydiff[static_cast<std::size_t>(best)] <= sensitivity * mean_dx) return {};
  return {ks[static_cast<std::size_t>(best)]};
}

KEstimate estimate_k(const CandidateSets& cands, const DiscoveryConfig& cfg,
                     int prior_k_star, const Rng& rng) {
  if (cfg.k_max < 2) throw ContractViolation("estimate_k: k_max must be at least 2");
  if (cands.kn_indices.empty())
    throw ContractViolation("estimate_k: no known-class candidates");

  KEstimate est;
  if (cands.im_indices.empty()) {
    est.updated = false;
    est.k_star = std::max(1, prior_k_star);
    return est;
  }

  const int nk = cands.num_known;
  const Matrix all = vstack(cands.kn_features, cands.im_features);
  const int n_points = all.rows();
  const int kn_count = cands.kn_features.rows();

  for (int c = nk + 1; c <= nk + cfg.k_max && c <= n_points; ++c) {
    Clustering cl = kmeans_pp(all, c, rng.fork(static_cast<std::uint64_t>(c)),
                              cfg.restarts, cfg.max_lloyd_iters);
    double ca = clustering_accuracy(
        std::span<const int>(cl.assignment.data(), static_cast<std::size_t>(kn_count)),
        cands.kn_labels, c, nk);
    est.sweep.push_back({c, cl.sse, ca});
  }
  if (est.sweep.empty())
    throw ContractViolation("estimate_k: sweep range is empty (too few candidates)");

  est.k_ca = est.sweep[0].k_total;
  double best_ca = est.sweep[0].ca;
  for (const SweepPoint& pt : est.sweep) {
    if (pt.ca > best_ca) {
      best_ca = pt.ca;
      est.k_ca = pt.k_total;
    }
  }

  est.k_elbow = est.k_ca;
  est.elbow_fallback = true;
  if (est.sweep.size() >= 4) {
    std::vector<int> ks;
    std::vector<double> sses;
    for (const SweepPoint& pt : est.sweep) {
      ks.push_back(pt.k_total);
      sses.push_back(pt.sse);
    }
    ElbowResult er = elbow_k(ks, sses, cfg.kneedle_sensitivity);
    if (er.knee.has_value()) {
      est.k_elbow = *er.knee;
      est.elbow_fallback = false;
    }
  }

  est.k_hat = (est.k_ca + est.k_elbow + 1) / 2;  // half-up for non-negative ints
  est.k_star = std::max(1, est.k_hat - nk);
  return est;
}

DiscoveryResult assign_pseudo_classes(const CandidateSets& cands, int k_star,
                                      const DiscoveryConfig& cfg,
                                      const Rng& rng) {
  if (k_star < 1) throw ContractViolation("assign_pseudo_classes: k_star must be positive");
  if (cands.im_indices.empty())
    throw ContractViolation("assign_pseudo_classes: no implicit candidates");

  DiscoveryResult res;
  res.first_new_label = cands.num_known;
  const int avail = static_cast<int>(cands.im_indices.size());
  res.k_star = k_star;
  if (res.k_star > avail) {
    res.k_star = avail;
    res.clamped = true;
  }

  Clustering cl = kmeans_pp(cands.im_features, res.k_star, rng, cfg.restarts,
                            cfg.max_lloyd_iters);
  res.pseudo_classes.assign(static_cast<std::size_t>(res.k_star), {});
  for (std::size_t i = 0; i < cands.im_indices.size(); ++i) {
    res.pseudo_classes[static_cast<std::size_t>(cl.assignment[i])].push_back(
        cands.im_indices[i]);
  }
  return res;
}

void write_sweep_csv(const std::string& path, const KEstimate& estimate) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) throw IoError("cannot open for writing: " + path);
  std::fprintf(fp, "k_total,sse,ca\n");
  for (const SweepPoint& pt : estimate.sweep) {
    std::fprintf(fp, "%d,%.17g,%.17g\n", pt.k_total, pt.sse, pt.ca);
  }
  if (std::fclose(fp) != 0) throw IoError("write failed: " + path);
}

}  // namespace scda
