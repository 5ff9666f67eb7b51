#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clhad/bsm.hpp"
#include "clhad/cube.hpp"
#include "clhad/error.hpp"
#include "clhad/nn/model.hpp"

namespace clhad {

struct AnomalyMap {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd raw;    // squared reconstruction residual per pixel
  double score_min = 0;   // normalization record
  double score_max = 0;
  Eigen::MatrixXd norm;   // min-max rescaled; all zero when raw is constant
};

// Per-pixel squared L2 distance between the SSNS vector and its
// reconstruction. The cube must already be resampled to the model's band
// count and normalized.
template <typename Scalar>
AnomalyMap anomaly_map(const HsiCube& cube, const BioGan<Scalar>& model, int window = 3) {
  if (2 * cube.bands != model.input_dim())
    throw ShapeError("anomaly_map: cube bands " + std::to_string(cube.bands) +
                     " do not match model input dim " + std::to_string(model.input_dim()));
  const int npix = cube.pixels();
  AnomalyMap map;
  map.width = cube.width;
  map.height = cube.height;
  map.raw.resize(cube.height, cube.width);

  const Index chunk = 1024;
  MatrixX<Scalar> batch(std::min<Index>(chunk, npix), model.input_dim());
  for (Index start = 0; start < npix; start += chunk) {
    const Index n = std::min<Index>(chunk, npix - start);
    for (Index r = 0; r < n; ++r)
      batch.row(r) = ssns_augment<Scalar>(cube, static_cast<int>(start + r), window).transpose();
    const MatrixX<Scalar> recon = model.generator.forward(model.params, batch.topRows(n));
    for (Index r = 0; r < n; ++r) {
      const int i = static_cast<int>(start + r);
      map.raw(i / cube.width, i % cube.width) =
          (recon.row(r) - batch.row(r)).template cast<double>().squaredNorm();
    }
  }

  map.score_min = map.raw.minCoeff();
  map.score_max = map.raw.maxCoeff();
  if (map.score_max > map.score_min)
    map.norm = (map.raw.array() - map.score_min) / (map.score_max - map.score_min);
  else
    map.norm = Eigen::MatrixXd::Zero(map.raw.rows(), map.raw.cols());
  return map;
}

struct RocTriplet {
  Eigen::VectorXd tau;  // descending threshold grid
  Eigen::VectorXd pd;   // detection rate at score >= tau
  Eigen::VectorXd pf;   // false-alarm rate at score >= tau
  double auc_df = 0;
  double auc_dtau = 0;
  double auc_ftau = 0;
};

// Exact ROC over all distinct normalized scores plus {0,1}; trapezoid
// integration. Detection is boundary-inclusive (score >= tau).
RocTriplet roc_triplet(const AnomalyMap& map, const GroundTruthMask& gt);

// Same sweep for a raw score/label list (scores already in [0,1]).
RocTriplet roc_from_scores(const Eigen::VectorXd& scores, const std::vector<std::uint8_t>& labels);

// Background suppression score. Negative values are possible and preserved.
inline double auc_bs(const RocTriplet& t) { return t.auc_df - t.auc_ftau; }

// Lower-triangular AUC(D,F) ledger: rows[j][i] is task i evaluated with the
// checkpoint after training task j (i <= j). single_task_refs[i] holds the
// from-scratch reference used by forward transfer.
struct AucMatrix {
  std::vector<std::vector<double>> rows;
  std::vector<double> single_task_refs;
};

enum class BwtVariant {
  PreviousRow,  // final row differenced against the previous checkpoint row
  Diagonal,     // common definition, against the same-task diagonal
};

struct ContinualMetrics {
  double acc = 0;
  std::optional<double> bwt;
  std::optional<double> fwt;
};

ContinualMetrics continual_metrics(const AucMatrix& matrix,
                                   BwtVariant variant = BwtVariant::PreviousRow);

struct TaskEval {
  std::string name;
  double auc_df = 0;
  double auc_dtau = 0;
  double auc_ftau = 0;
  double auc_bs = 0;
};

struct EvalReport {
  std::vector<TaskEval> tasks;
  std::optional<AucMatrix> matrix;
  double acc = 0;
  std::optional<double> bwt;
  std::optional<double> fwt;
  std::string config_hash;
};

void save_eval_report(const EvalReport& report, const std::filesystem::path& path);
void save_roc_csv(const RocTriplet& triplet, const std::filesystem::path& path);
AucMatrix load_auc_matrix(const std::filesystem::path& path);
void save_auc_matrix(const AucMatrix& matrix, const std::filesystem::path& path);

// Score maps travel as H x W x 1 cubes.
void save_anomaly_map(const AnomalyMap& map, const std::filesystem::path& path);
AnomalyMap load_anomaly_map(const std::filesystem::path& path);

}  // namespace clhad
