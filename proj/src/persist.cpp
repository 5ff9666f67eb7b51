#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "clhad/bsm.hpp"
#include "clhad/manifest.hpp"
#include "clhad/metrics.hpp"
#include "clhad/nn/model.hpp"
#include "clhad/replay.hpp"
#include "clhad/trainer.hpp"

namespace clhad {

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("unparseable JSON " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_f32(const float* data, std::size_t count, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(float)));
  if (!out) throw DataError("short write on " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<float> data(expected);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(expected * sizeof(float)));
  if (!in || in.gcount() != static_cast<std::streamsize>(expected * sizeof(float)))
    throw FormatError("payload size mismatch for " + path.string());
  char extra;
  if (in.read(&extra, 1))
    throw FormatError("payload larger than declared for " + path.string());
  return data;
}

}  // namespace

// --- background set ------------------------------------------------------

void save_background_set(const BackgroundSet<float>& set, const std::filesystem::path& path) {
  // row-major payload so rows match the sidecar's index order
  std::vector<float> flat(static_cast<std::size_t>(set.vectors.rows()) * set.vectors.cols());
  for (Index r = 0; r < set.vectors.rows(); ++r)
    for (Index c = 0; c < set.vectors.cols(); ++c)
      flat[static_cast<std::size_t>(r) * set.vectors.cols() + c] = set.vectors(r, c);
  write_f32(flat.data(), flat.size(), path);
  json sidecar = {{"rows", set.vectors.rows()}, {"cols", set.vectors.cols()},
                  {"indices", set.indices},     {"mu", set.threshold_used},
                  {"w", set.window},            {"task", set.source_task}};
  write_json(sidecar, path.string() + ".json");
}

BackgroundSet<float> load_background_set(const std::filesystem::path& path) {
  const json sidecar = read_json(path.string() + ".json");
  BackgroundSet<float> set;
  const Index rows = sidecar.at("rows").get<Index>();
  const Index cols = sidecar.at("cols").get<Index>();
  set.indices = sidecar.at("indices").get<std::vector<int>>();
  set.threshold_used = sidecar.at("mu").get<double>();
  set.window = sidecar.at("w").get<int>();
  set.source_task = sidecar.at("task").get<std::string>();
  if (static_cast<Index>(set.indices.size()) != rows)
    throw FormatError("background set index count mismatch in " + path.string());
  const std::vector<float> flat = read_f32(path, static_cast<std::size_t>(rows) * cols);
  set.vectors.resize(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      set.vectors(r, c) = flat[static_cast<std::size_t>(r) * cols + c];
  return set;
}

// --- replay buffer --------------------------------------------------------

void save_replay_buffer(const ReplayBuffer<float>& buffer, const std::filesystem::path& path) {
  std::vector<float> flat(static_cast<std::size_t>(buffer.vectors.rows()) * buffer.vectors.cols());
  for (Index r = 0; r < buffer.vectors.rows(); ++r)
    for (Index c = 0; c < buffer.vectors.cols(); ++c)
      flat[static_cast<std::size_t>(r) * buffer.vectors.cols() + c] = buffer.vectors(r, c);
  write_f32(flat.data(), flat.size(), path);
  json rows = json::array();
  for (const auto& p : buffer.provenance)
    rows.push_back({{"task", p.task},
                    {"cluster", p.cluster},
                    {"distance", p.distance},
                    {"source_index", p.source_index}});
  json sidecar = {{"rows", buffer.vectors.rows()},
                  {"cols", buffer.vectors.cols()},
                  {"provenance", rows}};
  write_json(sidecar, path.string() + ".json");
}

ReplayBuffer<float> load_replay_buffer(const std::filesystem::path& path) {
  const json sidecar = read_json(path.string() + ".json");
  ReplayBuffer<float> buffer;
  const Index rows = sidecar.at("rows").get<Index>();
  const Index cols = sidecar.at("cols").get<Index>();
  const std::vector<float> flat = read_f32(path, static_cast<std::size_t>(rows) * cols);
  buffer.vectors.resize(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      buffer.vectors(r, c) = flat[static_cast<std::size_t>(r) * cols + c];
  for (const json& p : sidecar.at("provenance"))
    buffer.provenance.push_back({p.at("task").get<int>(), p.at("cluster").get<int>(),
                                 p.at("distance").get<double>(),
                                 p.at("source_index").get<int>()});
  if (static_cast<Index>(buffer.provenance.size()) != rows)
    throw FormatError("replay provenance count mismatch in " + path.string());
  return buffer;
}

// --- model checkpoint ------------------------------------------------------

void save_checkpoint(const BioGan<float>& model, const std::filesystem::path& payload_path) {
  const Index n = model.params.size();
  std::vector<float> payload(static_cast<std::size_t>(3 * n));
  std::memcpy(payload.data(), model.params.values.data(), sizeof(float) * n);
  std::memcpy(payload.data() + n, model.params.m.data(), sizeof(float) * n);
  std::memcpy(payload.data() + 2 * n, model.params.v.data(), sizeof(float) * n);
  write_f32(payload.data(), payload.size(), payload_path);

  json manifest = {
      {"arch",
       {{"generator",
         {{"input_dim", model.gen_cfg.input_dim},
          {"hidden", model.gen_cfg.hidden},
          {"latent", model.gen_cfg.latent},
          {"leak", model.gen_cfg.leak}}},
        {"discriminator",
         {{"input_dim", model.disc_cfg.input_dim},
          {"msc_channels", model.disc_cfg.msc_channels},
          {"kernels", model.disc_cfg.kernels},
          {"attn_dim", model.disc_cfg.attn_dim},
          {"ffn_hidden", model.disc_cfg.ffn_hidden},
          {"head_hidden", model.disc_cfg.head_hidden},
          {"dropout", model.disc_cfg.dropout},
          {"leak", model.disc_cfg.leak}}}}},
      {"dims",
       {{"param_count", n},
        {"generator_params", model.generator.param_count()},
        {"discriminator_params", model.discriminator.param_count()}}},
      {"seed", model.seed},
      {"task_index", model.task_index},
      {"optimizer_state_offsets", {{"values", 0}, {"m", n}, {"v", 2 * n}}},
      {"adam_steps", {{"generator", model.gen_steps}, {"discriminator", model.disc_steps}}}};
  write_json(manifest, payload_path.string() + ".json");
}

BioGan<float> load_checkpoint(const std::filesystem::path& payload_path) {
  const json manifest = read_json(payload_path.string() + ".json");
  GeneratorConfig g;
  const json& jg = manifest.at("arch").at("generator");
  g.input_dim = jg.at("input_dim").get<Index>();
  g.hidden = jg.at("hidden").get<std::vector<Index>>();
  g.latent = jg.at("latent").get<Index>();
  g.leak = jg.at("leak").get<double>();
  DiscriminatorConfig d;
  const json& jd = manifest.at("arch").at("discriminator");
  d.input_dim = jd.at("input_dim").get<Index>();
  d.msc_channels = jd.at("msc_channels").get<Index>();
  d.attn_dim = jd.at("attn_dim").get<Index>();
  d.ffn_hidden = jd.at("ffn_hidden").get<Index>();
  d.head_hidden = jd.at("head_hidden").get<Index>();
  d.dropout = jd.at("dropout").get<double>();
  d.leak = jd.at("leak").get<double>();

  BioGan<float> model(g, d, manifest.at("seed").get<std::uint64_t>());
  const Index n = model.params.size();
  if (manifest.at("dims").at("param_count").get<Index>() != n)
    throw FormatError("checkpoint parameter count does not match architecture: " +
                      payload_path.string());
  const std::vector<float> payload = read_f32(payload_path, static_cast<std::size_t>(3 * n));
  std::memcpy(model.params.values.data(), payload.data(), sizeof(float) * n);
  std::memcpy(model.params.m.data(), payload.data() + n, sizeof(float) * n);
  std::memcpy(model.params.v.data(), payload.data() + 2 * n, sizeof(float) * n);
  model.task_index = manifest.at("task_index").get<int>();
  model.gen_steps = manifest.at("adam_steps").at("generator").get<std::int64_t>();
  model.disc_steps = manifest.at("adam_steps").at("discriminator").get<std::int64_t>();
  return model;
}

// --- anomaly maps -----------------------------------------------------------

void save_anomaly_map(const AnomalyMap& map, const std::filesystem::path& path) {
  HsiCube cube(map.width, map.height, 1, "anomaly_map");
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      cube.data[static_cast<std::size_t>(y) * map.width + x] =
          static_cast<float>(map.norm(y, x));
  save_cube(cube, path);
}

AnomalyMap load_anomaly_map(const std::filesystem::path& path) {
  const json header = read_json(path.string() + ".json");
  const int width = header.at("width").get<int>();
  const int height = header.at("height").get<int>();
  if (header.at("bands").get<int>() != 1)
    throw FormatError("anomaly map must have a single band: " + path.string());
  const std::vector<float> flat =
      read_f32(path, static_cast<std::size_t>(width) * height);
  AnomalyMap map;
  map.width = width;
  map.height = height;
  map.raw.resize(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      map.raw(y, x) = flat[static_cast<std::size_t>(y) * width + x];
  map.score_min = map.raw.minCoeff();
  map.score_max = map.raw.maxCoeff();
  map.norm = map.raw;
  return map;
}

// --- eval report, ROC CSV, AUC matrix ---------------------------------------

namespace {

json matrix_to_json(const AucMatrix& m) {
  json rows = json::array();
  for (const auto& row : m.rows) rows.push_back(row);
  return rows;
}

}  // namespace

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  json tasks = json::array();
  for (const auto& t : report.tasks)
    tasks.push_back({{"name", t.name},
                     {"auc_df", t.auc_df},
                     {"auc_dtau", t.auc_dtau},
                     {"auc_ftau", t.auc_ftau},
                     {"auc_bs", t.auc_bs}});
  json j = {{"tasks", tasks},
            {"auc_matrix", report.matrix ? matrix_to_json(*report.matrix) : json(nullptr)},
            {"single_task_refs", report.matrix && !report.matrix->single_task_refs.empty()
                                     ? json(report.matrix->single_task_refs)
                                     : json(nullptr)},
            {"acc", report.acc},
            {"bwt", report.bwt ? json(*report.bwt) : json(nullptr)},
            {"fwt", report.fwt ? json(*report.fwt) : json(nullptr)},
            {"config_hash", report.config_hash}};
  write_json(j, path);
}

void save_roc_csv(const RocTriplet& triplet, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "tau,pd,pf\n";
  char line[128];
  for (Index i = 0; i < triplet.tau.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", triplet.tau[i], triplet.pd[i],
                  triplet.pf[i]);
    out << line;
  }
}

AucMatrix load_auc_matrix(const std::filesystem::path& path) {
  const json j = read_json(path);
  AucMatrix m;
  const json& rows = j.is_array() ? j : j.at("rows");
  for (const json& row : rows) m.rows.push_back(row.get<std::vector<double>>());
  if (j.is_object() && j.contains("single_task_refs") && !j["single_task_refs"].is_null())
    m.single_task_refs = j["single_task_refs"].get<std::vector<double>>();
  return m;
}

void save_auc_matrix(const AucMatrix& matrix, const std::filesystem::path& path) {
  json j = {{"rows", matrix_to_json(matrix)}};
  if (!matrix.single_task_refs.empty()) j["single_task_refs"] = matrix.single_task_refs;
  write_json(j, path);
}

// --- train config ------------------------------------------------------------

TrainMode parse_train_mode(const std::string& name) {
  if (name == "continual") return TrainMode::Continual;
  if (name == "fine_tune") return TrainMode::FineTune;
  if (name == "joint") return TrainMode::Joint;
  if (name == "single_task") return TrainMode::SingleTask;
  throw ArgumentError("config field 'mode': unknown value '" + name + "'");
}

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Continual: return "continual";
    case TrainMode::FineTune: return "fine_tune";
    case TrainMode::Joint: return "joint";
    case TrainMode::SingleTask: return "single_task";
  }
  return "continual";
}

TrainConfig train_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("unparseable config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");

  static const std::set<std::string> allowed = {
      "mu",    "P",         "w",    "lambda_af", "lambda_cl",      "learning_rate",
      "epochs", "batch_size", "seed", "beta",      "beta_grid",      "mode",
      "steps_per_epoch", "replay_interval", "dropout"};
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ArgumentError("config field '" + key + "' is not recognized");

  TrainConfig cfg;
  try {
    if (j.contains("mu")) cfg.mu = j["mu"].get<double>();
    if (j.contains("P")) cfg.P = j["P"].get<int>();
    if (j.contains("w")) cfg.w = j["w"].get<int>();
    if (j.contains("lambda_af")) cfg.lambda_af = j["lambda_af"].get<double>();
    if (j.contains("lambda_cl")) cfg.lambda_cl = j["lambda_cl"].get<double>();
    if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("beta")) cfg.beta = j["beta"].get<double>();
    if (j.contains("beta_grid")) cfg.beta_grid = j["beta_grid"].get<std::vector<double>>();
    if (j.contains("mode")) cfg.mode = parse_train_mode(j["mode"].get<std::string>());
    if (j.contains("steps_per_epoch")) cfg.steps_per_epoch = j["steps_per_epoch"].get<int>();
    if (j.contains("replay_interval")) cfg.replay_interval = j["replay_interval"].get<int>();
    if (j.contains("dropout")) cfg.dropout = j["dropout"].get<double>();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config field has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return train_config_from_json_text(buf.str());
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j = {{"mu", cfg.mu},
            {"P", cfg.P},
            {"w", cfg.w},
            {"lambda_af", cfg.lambda_af},
            {"lambda_cl", cfg.lambda_cl},
            {"learning_rate", cfg.learning_rate},
            {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"seed", cfg.seed},
            {"beta", cfg.beta},
            {"beta_grid", cfg.beta_grid},
            {"mode", train_mode_name(cfg.mode)},
            {"steps_per_epoch", cfg.steps_per_epoch},
            {"replay_interval", cfg.replay_interval},
            {"dropout", cfg.dropout}};
  return j.dump(2);
}

std::string config_hash(const TrainConfig& cfg) {
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a(train_config_to_json(cfg))));
  return hex;
}

// --- run manifest, stream loading --------------------------------------------

void save_run_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  json j = {{"command", manifest.command},
            {"config_hash", manifest.config_hash},
            {"seed", manifest.seed},
            {"inputs", manifest.inputs},
            {"outputs", manifest.outputs},
            {"version", manifest.version},
            {"wall_clock_seconds", manifest.wall_clock_seconds}};
  write_json(j, path);
}

std::vector<HsiCube> load_stream(const TaskStream& stream) {
  std::vector<HsiCube> cubes;
  cubes.reserve(stream.cube_paths.size());
  for (const auto& path : stream.cube_paths) cubes.push_back(load_cube(path));
  return cubes;
}

std::vector<HsiCube> prepare_stream(std::vector<HsiCube> cubes) {
  int min_bands = cubes.front().bands;
  for (const HsiCube& cube : cubes) min_bands = std::min(min_bands, cube.bands);
  for (HsiCube& cube : cubes) {
    cube = resample_bands(cube, min_bands);
    normalize(cube);
  }
  return cubes;
}

}  // namespace clhad
