#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmsum/model/config.hpp"
#include "mmsum/nn/tensor.hpp"

namespace mmsum::model {

// All learnable arrays, in a fixed named order. The two encoder passes
// share this single parameter set; checkpoints persist exactly these
// entries plus the config fingerprint and seed.
struct ModelParams {
  ModelConfig cfg;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, nn::Tensor>> entries;

  nn::Tensor& at(const std::string& name);
  const nn::Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<nn::Tensor> tensors() const;

  // Seeded initialization. `transe_entities`, when given, must hold
  // n_entities x d_entity values and becomes the entity embedding table;
  // otherwise the table is random with L2-normalized rows.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed,
                          const std::vector<double>* transe_entities = nullptr);

  // Zero-valued parameter set with the right names and shapes.
  static ModelParams skeleton(const ModelConfig& cfg);
};

void save_checkpoint(const ModelParams& model, const std::string& path);
ModelParams load_checkpoint(const std::string& path);
// Strict in-place load: every name and shape must match the target model.
void load_checkpoint_into(ModelParams& model, const std::string& path);

}  // namespace mmsum::model
