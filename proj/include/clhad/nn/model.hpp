#pragma once

#include <cstdint>
#include <filesystem>

#include "clhad/nn/discriminator.hpp"
#include "clhad/nn/generator.hpp"

namespace clhad {

constexpr std::uint64_t kTagModelInit = 0x6d6f64656c;  // model weight init stream

// The checkpointable unit: one flat parameter vector (with Adam moments)
// shared by the generator and discriminator, plus the architecture manifest
// needed to rebuild both.
template <typename Scalar>
struct BioGan {
  GeneratorConfig gen_cfg;
  DiscriminatorConfig disc_cfg;
  Generator<Scalar> generator;
  Discriminator<Scalar> discriminator;
  ParamStore<Scalar> params;
  std::uint64_t seed = 0;
  int task_index = -1;  // last completed task, -1 before training
  std::int64_t gen_steps = 0;
  std::int64_t disc_steps = 0;

  BioGan() = default;

  BioGan(const GeneratorConfig& g, const DiscriminatorConfig& d, std::uint64_t init_seed)
      : gen_cfg(g), disc_cfg(d), seed(init_seed) {
    Index cursor = 0;
    generator = Generator<Scalar>(gen_cfg, cursor);
    discriminator = Discriminator<Scalar>(disc_cfg, cursor);
    params.resize(cursor);
    Rng rng(mix_seed(init_seed, kTagModelInit));
    generator.init(params, rng);
    discriminator.init(params, rng);
  }

  static BioGan with_defaults(Index input_dim, std::uint64_t init_seed) {
    return BioGan(GeneratorConfig::defaults(input_dim),
                  DiscriminatorConfig::defaults(input_dim), init_seed);
  }

  Index input_dim() const { return gen_cfg.input_dim; }
  Index param_count() const { return params.size(); }
};

// Checkpoint: float32 payload [values | m | v] next to a JSON manifest
// "<payload>.json" carrying arch, dims, seed, task_index and the optimizer
// state offsets. Round-trips bit-exactly.
void save_checkpoint(const BioGan<float>& model, const std::filesystem::path& payload_path);
BioGan<float> load_checkpoint(const std::filesystem::path& payload_path);

}  // namespace clhad
