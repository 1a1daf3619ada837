#pragma once

#include <cstdint>
#include <string>

namespace mmsum::model {

// Gate ablation switches: `fixed_one` keeps only the text-image visual
// states, `fixed_zero` only the entity-image ones.
enum class GateMode { learned, fixed_one, fixed_zero };

std::string to_string(GateMode m);
GateMode gate_mode_from(const std::string& s);

struct ModelConfig {
  std::size_t vocab_size = 200;
  std::size_t d_model = 64;
  std::size_t n_enc_layers = 2;
  std::size_t n_dec_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ffn = 256;
  std::size_t d_entity = 32;
  std::size_t n_entities = 20;
  std::size_t d_q = 32;
  std::size_t n_queries = 4;
  std::size_t max_context = 1024;
  std::size_t max_summary_len = 32;
  std::size_t max_images = 8;
  double ln_eps = 1e-10;
  GateMode gate_mode = GateMode::learned;

  std::size_t head_dim() const { return d_model / n_heads; }
  void validate() const;

  // Canonical key=value listing; embedded in checkpoints so a model can
  // be reconstructed (and mismatches rejected) on load.
  std::string fingerprint() const;
  static ModelConfig from_fingerprint(const std::string& fp);
};

}  // namespace mmsum::model
