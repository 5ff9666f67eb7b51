// clhad: synth | train | detect | eval
//
// Batch front end over the toolkit library. Every run writes a manifest next
// to its outputs; exit codes are 0 success, 2 argument error, 3 data/format
// error, 4 divergence.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clhad/manifest.hpp"
#include "clhad/metrics.hpp"
#include "clhad/synth.hpp"
#include "clhad/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("CLHAD_LOG");
  if (!env) return LogLevel::Info;
  const std::string v(env);
  if (v == "quiet") return LogLevel::Quiet;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::cerr << "[clhad] " << msg << "\n";
}

// Cube arguments may name the payload or its sidecar.
fs::path payload_path(const fs::path& arg) {
  if (arg.extension() == ".json") {
    fs::path stripped = arg;
    stripped.replace_extension();
    return stripped;
  }
  return arg;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int cmd_synth(const fs::path& out_dir, int tasks, int size, int bands, double anomaly_frac,
              double noise, int endmembers, std::uint64_t seed) {
  Timer timer;
  fs::create_directories(out_dir);
  clhad::RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = seed;
  manifest.version = clhad::toolkit_version();

  for (int k = 0; k < tasks; ++k) {
    clhad::SceneSpec spec;
    spec.size = size;
    spec.bands = bands;
    spec.endmembers = endmembers;
    spec.anomaly_fraction = anomaly_frac;
    spec.noise_sigma = noise;
    spec.seed = clhad::mix_seed(seed, 0x73796e7468, static_cast<std::uint64_t>(k));
    auto [cube, mask] = clhad::synth_scene(spec);
    cube.name = "task_" + std::to_string(k);

    const fs::path cube_path = out_dir / ("task_" + std::to_string(k) + ".bsq");
    const fs::path mask_path = out_dir / ("task_" + std::to_string(k) + ".mask");
    clhad::save_cube(cube, cube_path);
    clhad::save_mask(mask, mask_path);
    manifest.outputs.push_back(cube_path.string());
    manifest.outputs.push_back(mask_path.string());
    info("wrote " + cube_path.string());
  }
  json args = {{"tasks", tasks},       {"size", size},   {"bands", bands},
               {"anomaly_frac", anomaly_frac}, {"noise", noise}, {"endmembers", endmembers},
               {"seed", seed}};
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(clhad::fnv1a(args.dump())));
  manifest.config_hash = hex;
  manifest.wall_clock_seconds = timer.seconds();
  clhad::save_run_manifest(manifest, out_dir / "manifest.json");
  return 0;
}

int cmd_train(const std::vector<fs::path>& task_paths, const fs::path& config_path,
              const std::string& mode_flag, const fs::path& out_dir,
              const fs::path& resume_path) {
  Timer timer;
  clhad::TrainConfig cfg;
  if (!config_path.empty()) cfg = clhad::train_config_from_json_file(config_path);
  if (!mode_flag.empty()) cfg.mode = clhad::parse_train_mode(mode_flag);
  fs::create_directories(out_dir);

  clhad::TaskStream stream;
  for (const auto& p : task_paths) stream.cube_paths.push_back(payload_path(p));
  const std::vector<clhad::HsiCube> cubes = clhad::load_stream(stream);

  std::ofstream log(out_dir / "train_log.jsonl");
  if (!log) throw clhad::DataError("cannot write training log in " + out_dir.string());
  clhad::LossSink sink = [&](const clhad::LossRecord& r) {
    json line = {{"task", r.task},          {"epoch", r.epoch},      {"step", r.step},
                 {"l_recon", r.losses.l_recon}, {"l_g", r.losses.l_g},   {"l_d", r.losses.l_d},
                 {"l_af", r.losses.l_af},   {"l_cl", r.losses.l_cl}};
    log << line.dump() << "\n";
    if (log_level() >= LogLevel::Debug && r.step == 0)
      std::cerr << "[clhad] task " << r.task << " epoch " << r.epoch << " total "
                << r.losses.total() << "\n";
  };

  clhad::RunManifest manifest;
  manifest.command = "train";
  manifest.config_hash = clhad::config_hash(cfg);
  manifest.seed = cfg.seed;
  manifest.version = clhad::toolkit_version();
  for (const auto& p : stream.cube_paths) manifest.inputs.push_back(p.string());

  if (cfg.mode == clhad::TrainMode::Joint) {
    const auto model = clhad::train_joint<float>(cubes, cfg, sink);
    const fs::path ck = out_dir / "checkpoint_joint.bin";
    clhad::save_checkpoint(model, ck);
    manifest.outputs.push_back(ck.string());
    info("joint checkpoint " + ck.string());
  } else {
    clhad::TaskCheckpoint<float> resume;
    const clhad::TaskCheckpoint<float>* resume_ptr = nullptr;
    if (!resume_path.empty()) {
      resume.model = clhad::load_checkpoint(resume_path);
      const fs::path buffer_path =
          resume_path.parent_path() /
          ("replay_" + std::to_string(resume.model.task_index) + ".bin");
      if (fs::exists(buffer_path)) resume.buffer = clhad::load_replay_buffer(buffer_path);
      resume_ptr = &resume;
      info("resuming after task " + std::to_string(resume.model.task_index));
    }
    const auto checkpoints = cfg.mode == clhad::TrainMode::FineTune
                                 ? clhad::train_fine_tune<float>(cubes, cfg, sink, resume_ptr)
                                 : clhad::train_continual<float>(cubes, cfg, sink, resume_ptr);
    for (const auto& task : checkpoints.tasks) {
      const int t = task.model.task_index;
      const fs::path ck = out_dir / ("checkpoint_" + std::to_string(t) + ".bin");
      clhad::save_checkpoint(task.model, ck);
      manifest.outputs.push_back(ck.string());
      if (cfg.mode == clhad::TrainMode::Continual) {
        const fs::path rb = out_dir / ("replay_" + std::to_string(t) + ".bin");
        clhad::save_replay_buffer(task.buffer, rb);
        manifest.outputs.push_back(rb.string());
      }
      info("checkpoint " + ck.string());
    }
  }
  manifest.wall_clock_seconds = timer.seconds();
  clhad::save_run_manifest(manifest, out_dir / "manifest.json");
  return 0;
}

int cmd_detect(const fs::path& checkpoint, const fs::path& input, const fs::path& out,
               int window) {
  Timer timer;
  const clhad::BioGan<float> model = clhad::load_checkpoint(checkpoint);
  clhad::HsiCube cube = clhad::load_cube(payload_path(input));
  const int model_bands = static_cast<int>(model.input_dim() / 2);
  if (cube.bands < model_bands)
    throw clhad::ShapeError("detect: cube has " + std::to_string(cube.bands) +
                            " bands, model needs " + std::to_string(model_bands));
  if (cube.bands > model_bands) cube = clhad::resample_bands(cube, model_bands);
  clhad::normalize(cube);
  const clhad::AnomalyMap map = clhad::anomaly_map(cube, model, window);
  clhad::save_anomaly_map(map, out);

  clhad::RunManifest manifest;
  manifest.command = "detect";
  manifest.seed = model.seed;
  manifest.version = clhad::toolkit_version();
  manifest.inputs = {checkpoint.string(), input.string()};
  manifest.outputs = {out.string()};
  manifest.wall_clock_seconds = timer.seconds();
  clhad::save_run_manifest(manifest, out.string() + ".manifest.json");
  info("map " + out.string());
  return 0;
}

int cmd_eval(const std::vector<fs::path>& maps, const std::vector<fs::path>& gts,
             const fs::path& matrix_path, const fs::path& out) {
  Timer timer;
  if (maps.size() != gts.size())
    throw clhad::ArgumentError("eval: got " + std::to_string(maps.size()) + " maps but " +
                               std::to_string(gts.size()) + " ground-truth masks");
  if (maps.empty()) throw clhad::ArgumentError("eval: need at least one map");

  clhad::EvalReport report;
  double auc_sum = 0.0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const clhad::AnomalyMap map = clhad::load_anomaly_map(payload_path(maps[i]));
    const clhad::GroundTruthMask gt = clhad::load_mask(payload_path(gts[i]));
    const clhad::RocTriplet roc = clhad::roc_triplet(map, gt);
    clhad::TaskEval te;
    te.name = payload_path(maps[i]).stem().string();
    te.auc_df = roc.auc_df;
    te.auc_dtau = roc.auc_dtau;
    te.auc_ftau = roc.auc_ftau;
    te.auc_bs = clhad::auc_bs(roc);
    report.tasks.push_back(te);
    auc_sum += roc.auc_df;

    fs::path csv = out;
    csv.replace_extension();
    csv += "_task" + std::to_string(i) + "_roc.csv";
    clhad::save_roc_csv(roc, csv);
  }
  report.acc = auc_sum / static_cast<double>(maps.size());

  if (!matrix_path.empty()) {
    clhad::AucMatrix matrix = clhad::load_auc_matrix(matrix_path);
    const clhad::ContinualMetrics cm = clhad::continual_metrics(matrix);
    report.matrix = std::move(matrix);
    report.acc = cm.acc;
    report.bwt = cm.bwt;
    report.fwt = cm.fwt;
  }

  json hash_src = json::array();
  for (const auto& m : maps) hash_src.push_back(m.string());
  for (const auto& g : gts) hash_src.push_back(g.string());
  hash_src.push_back(matrix_path.string());
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(clhad::fnv1a(hash_src.dump())));
  report.config_hash = hex;

  clhad::save_eval_report(report, out);

  clhad::RunManifest manifest;
  manifest.command = "eval";
  manifest.config_hash = report.config_hash;
  manifest.version = clhad::toolkit_version();
  for (const auto& m : maps) manifest.inputs.push_back(m.string());
  for (const auto& g : gts) manifest.inputs.push_back(g.string());
  manifest.outputs = {out.string()};
  manifest.wall_clock_seconds = timer.seconds();
  clhad::save_run_manifest(manifest, out.string() + ".manifest.json");
  info("report " + out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual-learning hyperspectral anomaly detection toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic task scenes");
  fs::path synth_out;
  int synth_tasks = 1, synth_size = 64, synth_bands = 64, synth_endmembers = 4;
  double synth_frac = 0.01, synth_noise = 0.008;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--tasks", synth_tasks, "number of scenes");
  synth->add_option("--size", synth_size, "scene edge length");
  synth->add_option("--bands", synth_bands, "spectral bands");
  synth->add_option("--anomaly-frac", synth_frac, "anomalous pixel fraction");
  synth->add_option("--noise", synth_noise, "per-band Gaussian noise sigma");
  synth->add_option("--endmembers", synth_endmembers, "background endmember count");
  synth->add_option("--seed", synth_seed, "master seed");

  // train
  auto* train = app.add_subcommand("train", "train on a task stream");
  std::vector<fs::path> train_tasks;
  fs::path train_config, train_out, train_resume;
  std::string train_mode;
  train->add_option("--tasks", train_tasks, "task cube paths, in stream order")->required();
  train->add_option("--config", train_config, "JSON config mirroring TrainConfig");
  train->add_option("--mode", train_mode, "continual|fine_tune|joint|single_task");
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--resume", train_resume, "checkpoint payload to resume after");

  // detect
  auto* detect = app.add_subcommand("detect", "score a cube with a trained generator");
  fs::path det_ck, det_in, det_out;
  int det_window = 3;
  detect->add_option("--checkpoint", det_ck, "checkpoint payload")->required();
  detect->add_option("--input", det_in, "input cube")->required();
  detect->add_option("--out", det_out, "output map payload")->required();
  detect->add_option("--window", det_window, "SSNS window");

  // eval
  auto* eval = app.add_subcommand("eval", "ROC/AUC evaluation and continual metrics");
  std::vector<fs::path> eval_maps, eval_gts;
  fs::path eval_matrix, eval_out;
  eval->add_option("--maps", eval_maps, "anomaly map payloads")->required();
  eval->add_option("--gts", eval_gts, "ground-truth mask payloads")->required();
  eval->add_option("--auc-matrix", eval_matrix, "lower-triangular AUC matrix JSON");
  eval->add_option("--out", eval_out, "report path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_tasks, synth_size, synth_bands, synth_frac, synth_noise,
                       synth_endmembers, synth_seed);
    if (train->parsed())
      return cmd_train(train_tasks, train_config, train_mode, train_out, train_resume);
    if (detect->parsed()) return cmd_detect(det_ck, det_in, det_out, det_window);
    if (eval->parsed()) return cmd_eval(eval_maps, eval_gts, eval_matrix, eval_out);
  } catch (const clhad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
