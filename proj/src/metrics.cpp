#include "clhad/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace clhad {

RocTriplet roc_from_scores(const Eigen::VectorXd& scores,
                           const std::vector<std::uint8_t>& labels) {
  const Index n = scores.size();
  if (static_cast<Index>(labels.size()) != n)
    throw ShapeError("roc: score/label count mismatch");
  Index positives = 0;
  for (std::uint8_t l : labels) positives += l ? 1 : 0;
  const Index negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw MetricError("roc: ground truth needs at least one anomaly and one background pixel");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return scores[a] > scores[b]; });

  // cumulative TP/FP at "score >= tau" for every distinct score, descending
  std::vector<double> grid, tp_at, fp_at;
  Index tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[static_cast<std::size_t>(order[i])])
        ++tp;
      else
        ++fp;
      ++i;
    }
    grid.push_back(s);
    tp_at.push_back(static_cast<double>(tp));
    fp_at.push_back(static_cast<double>(fp));
  }

  // threshold sweep: distinct scores plus {0, 1}
  std::vector<double> taus = grid;
  taus.push_back(0.0);
  taus.push_back(1.0);
  std::sort(taus.begin(), taus.end(), std::greater<>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  RocTriplet t;
  t.tau.resize(static_cast<Index>(taus.size()));
  t.pd.resize(static_cast<Index>(taus.size()));
  t.pf.resize(static_cast<Index>(taus.size()));
  for (std::size_t k = 0; k < taus.size(); ++k) {
    // last grid entry with score >= tau (grid is descending)
    const auto it = std::lower_bound(grid.begin(), grid.end(), taus[k], std::greater<>());
    const std::ptrdiff_t idx = it - grid.begin() - 1;
    const double tpk = idx >= 0 ? tp_at[static_cast<std::size_t>(idx)] : 0.0;
    const double fpk = idx >= 0 ? fp_at[static_cast<std::size_t>(idx)] : 0.0;
    t.tau[static_cast<Index>(k)] = taus[k];
    t.pd[static_cast<Index>(k)] = tpk / static_cast<double>(positives);
    t.pf[static_cast<Index>(k)] = fpk / static_cast<double>(negatives);
  }

  // AUC(D,F): trapezoid over the ROC polyline anchored at (0,0)
  double auc = 0.0, prev_pf = 0.0, prev_pd = 0.0;
  for (Index k = 0; k < t.tau.size(); ++k) {
    auc += (t.pf[k] - prev_pf) * 0.5 * (t.pd[k] + prev_pd);
    prev_pf = t.pf[k];
    prev_pd = t.pd[k];
  }
  t.auc_df = auc;

  // AUC(D,tau) and AUC(F,tau): trapezoid over tau in [0,1], ascending
  double auc_dt = 0.0, auc_ft = 0.0;
  for (Index k = t.tau.size() - 1; k > 0; --k) {
    const double width = t.tau[k - 1] - t.tau[k];
    auc_dt += width * 0.5 * (t.pd[k] + t.pd[k - 1]);
    auc_ft += width * 0.5 * (t.pf[k] + t.pf[k - 1]);
  }
  t.auc_dtau = auc_dt;
  t.auc_ftau = auc_ft;
  return t;
}

RocTriplet roc_triplet(const AnomalyMap& map, const GroundTruthMask& gt) {
  if (map.width != gt.width || map.height != gt.height)
    throw ShapeError("roc_triplet: map and mask shapes differ");
  const Index n = static_cast<Index>(map.width) * map.height;
  Eigen::VectorXd scores(n);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      const Index i = static_cast<Index>(y) * map.width + x;
      scores[i] = map.norm(y, x);
      labels[static_cast<std::size_t>(i)] = gt.at(x, y);
    }
  return roc_from_scores(scores, labels);
}

ContinualMetrics continual_metrics(const AucMatrix& matrix, BwtVariant variant) {
  const std::size_t tasks = matrix.rows.size();
  if (tasks == 0) throw MetricError("continual_metrics: empty AUC matrix");
  for (std::size_t j = 0; j < tasks; ++j)
    if (matrix.rows[j].size() != j + 1)
      throw MetricError("continual_metrics: row " + std::to_string(j) + " has " +
                        std::to_string(matrix.rows[j].size()) + " entries, expected " +
                        std::to_string(j + 1));
  if (!matrix.single_task_refs.empty() && matrix.single_task_refs.size() != tasks)
    throw MetricError("continual_metrics: reference count does not match task count");

  ContinualMetrics out;
  const auto& final_row = matrix.rows[tasks - 1];
  out.acc = std::accumulate(final_row.begin(), final_row.end(), 0.0) /
            static_cast<double>(tasks);
  if (tasks >= 2) {
    double bwt = 0.0;
    for (std::size_t i = 0; i + 1 < tasks; ++i) {
      const double anchor = variant == BwtVariant::PreviousRow
                                ? matrix.rows[tasks - 2][i]
                                : matrix.rows[i][i];
      bwt += final_row[i] - anchor;
    }
    out.bwt = bwt / static_cast<double>(tasks - 1);
    if (!matrix.single_task_refs.empty()) {
      double fwt = 0.0;
      for (std::size_t i = 1; i < tasks; ++i)
        fwt += final_row[i] - matrix.single_task_refs[i];
      out.fwt = fwt / static_cast<double>(tasks - 1);
    }
  }
  return out;
}

}  // namespace clhad
