#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "clhad/error.hpp"
#include "clhad/rng.hpp"
#include "clhad/types.hpp"

namespace clhad {

template <typename Scalar>
struct ClusterResult {
  std::vector<int> assignments;        // cluster id per data row
  MatrixX<Scalar> centroids;           // P x d
  double inertia = 0.0;                // sum of squared distances
  std::vector<double> inertia_history; // one entry per EM iteration
};

// Lloyd iterations with k-means++ seeding. Distances and centroid updates
// accumulate in double so the inertia sequence is monotone non-increasing;
// an emptied cluster is re-seeded at the farthest point. Ties break toward
// the lower index for reproducibility.
template <typename Scalar>
ClusterResult<Scalar> kmeans(const MatrixX<Scalar>& data, int clusters, std::uint64_t seed,
                             int max_iter = 300, double tol = 1e-6) {
  const Index m = data.rows();
  const Index d = data.cols();
  if (clusters < 1) throw ArgumentError("kmeans: cluster count must be >= 1");
  if (m < clusters) throw ArgumentError("kmeans: fewer rows than clusters");

  const MatrixX<double> x = data.template cast<double>();
  const VectorX<double> row_sq = x.rowwise().squaredNorm();
  MatrixX<double> centroids(clusters, d);
  Rng rng(seed);

  // k-means++ seeding
  std::vector<double> min_dist(static_cast<std::size_t>(m),
                               std::numeric_limits<double>::max());
  centroids.row(0) = x.row(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(m))));
  for (int c = 1; c < clusters; ++c) {
    double total = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double dist = (x.row(i) - centroids.row(c - 1)).squaredNorm();
      min_dist[static_cast<std::size_t>(i)] =
          std::min(min_dist[static_cast<std::size_t>(i)], dist);
      total += min_dist[static_cast<std::size_t>(i)];
    }
    Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double run = 0.0;
      for (Index i = 0; i < m; ++i) {
        run += min_dist[static_cast<std::size_t>(i)];
        if (run >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(m)));
    }
    centroids.row(c) = x.row(pick);
  }

  ClusterResult<Scalar> result;
  result.assignments.assign(static_cast<std::size_t>(m), 0);
  std::vector<double> dist_to_own(static_cast<std::size_t>(m), 0.0);
  double prev_inertia = std::numeric_limits<double>::max();

  for (int iter = 0; iter < max_iter; ++iter) {
    // assignment
    for (Index i = 0; i < m; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int c = 0; c < clusters; ++c) {
        const double dist = (x.row(i) - centroids.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      result.assignments[static_cast<std::size_t>(i)] = best;
      dist_to_own[static_cast<std::size_t>(i)] = best_d;
    }
    // re-seed emptied clusters at the farthest point
    std::vector<Index> counts(static_cast<std::size_t>(clusters), 0);
    for (int a : result.assignments) ++counts[static_cast<std::size_t>(a)];
    for (int c = 0; c < clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < m; ++i)
        if (dist_to_own[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist_to_own[static_cast<std::size_t>(i)];
          far = i;
        }
      centroids.row(c) = x.row(far);
      --counts[static_cast<std::size_t>(result.assignments[static_cast<std::size_t>(far)])];
      result.assignments[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist_to_own[static_cast<std::size_t>(far)] = 0.0;
    }

    const double inertia =
        std::accumulate(dist_to_own.begin(), dist_to_own.end(), 0.0);
    result.inertia_history.push_back(inertia);
    result.inertia = inertia;
    const bool converged =
        prev_inertia - inertia <= tol * std::max(prev_inertia, 1e-300) &&
        prev_inertia != std::numeric_limits<double>::max();
    prev_inertia = inertia;
    if (converged) break;

    // centroid update
    MatrixX<double> sums = MatrixX<double>::Zero(clusters, d);
    for (Index i = 0; i < m; ++i)
      sums.row(result.assignments[static_cast<std::size_t>(i)]) += x.row(i);
    for (int c = 0; c < clusters; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }

  result.centroids = centroids.template cast<Scalar>();
  return result;
}

struct ExemplarSelection {
  std::vector<int> rows;                // selected data row indices
  std::vector<int> clusters;            // cluster id per selected row
  std::vector<double> distances;        // squared distance to the centroid
  std::vector<int> per_cluster_counts;  // size P
  int total = 0;                        // N
};

// One percent of each cluster (floor), at least one row per cluster, taken
// nearest-first from the centroid; distance ties break on the lower row index.
template <typename Scalar>
ExemplarSelection select_exemplars(const MatrixX<Scalar>& data,
                                   const ClusterResult<Scalar>& cluster) {
  const Index m = data.rows();
  if (static_cast<Index>(cluster.assignments.size()) != m)
    throw ArgumentError("select_exemplars: clustering does not match data");
  const int p = static_cast<int>(cluster.centroids.rows());

  std::vector<std::vector<std::pair<double, int>>> per_cluster(static_cast<std::size_t>(p));
  const MatrixX<double> x = data.template cast<double>();
  const MatrixX<double> c = cluster.centroids.template cast<double>();
  for (Index i = 0; i < m; ++i) {
    const int a = cluster.assignments[static_cast<std::size_t>(i)];
    const double dist = (x.row(i) - c.row(a)).squaredNorm();
    per_cluster[static_cast<std::size_t>(a)].emplace_back(dist, static_cast<int>(i));
  }

  ExemplarSelection sel;
  sel.per_cluster_counts.assign(static_cast<std::size_t>(p), 0);
  for (int cid = 0; cid < p; ++cid) {
    auto& members = per_cluster[static_cast<std::size_t>(cid)];
    if (members.empty()) continue;
    std::sort(members.begin(), members.end());
    const int quota =
        std::max(1, static_cast<int>(members.size()) / 100);
    sel.per_cluster_counts[static_cast<std::size_t>(cid)] = quota;
    for (int r = 0; r < quota; ++r) {
      sel.rows.push_back(members[static_cast<std::size_t>(r)].second);
      sel.clusters.push_back(cid);
      sel.distances.push_back(members[static_cast<std::size_t>(r)].first);
    }
  }
  sel.total = static_cast<int>(sel.rows.size());
  return sel;
}

// Counts alone, for replay-arithmetic checks against published cluster sizes.
inline std::pair<std::vector<int>, int> exemplar_counts(const std::vector<int>& cluster_sizes) {
  std::vector<int> counts;
  int total = 0;
  for (int size : cluster_sizes) {
    const int quota = size > 0 ? std::max(1, size / 100) : 0;
    counts.push_back(quota);
    total += quota;
  }
  return {counts, total};
}

struct ReplayProvenance {
  int task = 0;
  int cluster = 0;
  double distance = 0.0;
  int source_index = 0;
};

// Cross-task exemplar store; unbounded union, one write per task.
template <typename Scalar>
struct ReplayBuffer {
  MatrixX<Scalar> vectors;  // rows x 2C
  std::vector<ReplayProvenance> provenance;

  Index size() const { return vectors.rows(); }
  bool empty() const { return vectors.rows() == 0; }
};

template <typename Scalar>
struct TaskSelection {
  int task = 0;
  MatrixX<Scalar> rows;
  std::vector<int> source_indices;
  std::vector<int> clusters;
  std::vector<double> distances;
};

template <typename Scalar>
TaskSelection<Scalar> make_selection(int task, const MatrixX<Scalar>& data,
                                     const ExemplarSelection& sel) {
  TaskSelection<Scalar> out;
  out.task = task;
  out.rows.resize(static_cast<Index>(sel.rows.size()), data.cols());
  for (std::size_t r = 0; r < sel.rows.size(); ++r)
    out.rows.row(static_cast<Index>(r)) = data.row(sel.rows[r]);
  out.source_indices = sel.rows;
  out.clusters = sel.clusters;
  out.distances = sel.distances;
  return out;
}

template <typename Scalar>
void update_buffer(ReplayBuffer<Scalar>& buffer, const TaskSelection<Scalar>& selection) {
  std::set<std::pair<int, int>> seen;
  for (const auto& row : buffer.provenance) seen.emplace(row.task, row.source_index);
  for (int idx : selection.source_indices)
    if (!seen.emplace(selection.task, idx).second)
      throw IntegrityError("update_buffer: duplicate (task " + std::to_string(selection.task) +
                           ", index " + std::to_string(idx) + ")");

  const Index old_rows = buffer.vectors.rows();
  const Index add = selection.rows.rows();
  if (old_rows == 0) {
    buffer.vectors = selection.rows;
  } else {
    buffer.vectors.conservativeResize(old_rows + add, Eigen::NoChange);
    buffer.vectors.bottomRows(add) = selection.rows;
  }
  for (Index r = 0; r < add; ++r)
    buffer.provenance.push_back({selection.task,
                                 selection.clusters[static_cast<std::size_t>(r)],
                                 selection.distances[static_cast<std::size_t>(r)],
                                 selection.source_indices[static_cast<std::size_t>(r)]});
}

void save_replay_buffer(const ReplayBuffer<float>& buffer, const std::filesystem::path& path);
ReplayBuffer<float> load_replay_buffer(const std::filesystem::path& path);

}  // namespace clhad
