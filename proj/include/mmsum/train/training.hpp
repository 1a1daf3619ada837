#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmsum/corpus/corpus.hpp"
#include "mmsum/metrics/metrics.hpp"
#include "mmsum/model/fusion_decoder.hpp"
#include "mmsum/model/image_selection.hpp"
#include "mmsum/model/params.hpp"

namespace mmsum::train {

enum class Stage { modal_matching, finetune };

struct TrainConfig {
  Stage stage = Stage::finetune;
  double alpha = 1.0;  // image-selection loss weight, >= 0
  double tau = 1.0;    // distillation temperature
  double learning_rate = 3e-4;
  std::size_t batch_size = 4;
  std::size_t epochs = 200;
  std::size_t n_subsets = 1;
  std::size_t top_k_checkpoints = 3;
  std::uint64_t seed = 1;
  std::string teacher = "toy";
  std::uint64_t teacher_seed = 99;
  bool log_mean_per_token = false;

  void validate() const;
};

struct CheckpointInfo {
  std::string path;
  double val_loss = 0.0;
  std::size_t subset = 0;
};

// Stage-1 loss for one document: teacher-forced NLL against the memory of
// the text-image pass alone (no gate, no entity pass, no distillation).
nn::Tensor stage1_doc_loss(const model::ModelParams& params, const corpus::Document& doc);

struct DocLosses {
  nn::Tensor summarization;
  nn::Tensor distillation;  // undefined for a document without images
  double gate_value = 0.0;
};
DocLosses stage2_doc_losses(const model::ModelParams& params, const corpus::Document& doc,
                            const model::Teacher& teacher, double tau);

struct BatchLosses {
  nn::Tensor total;
  nn::Tensor summarization;
  nn::Tensor distillation;
  double gate_mean = 0.0;
  std::size_t target_tokens = 0;
};
// Batch objective alpha * L_IS + L_Sum, each part averaged over the batch.
// With alpha == 0 the total IS the summarization term.
BatchLosses stage2_batch_losses(const model::ModelParams& params,
                                const std::vector<corpus::Document>& docs,
                                const std::vector<std::size_t>& batch,
                                const model::Teacher& teacher, double alpha, double tau);

// Stage 1: trains ONLY enc.W_v and enc.v_cls; every other parameter is
// bitwise untouched. cfg.stage must be modal_matching.
void modal_matching_stage(model::ModelParams& model, const std::vector<corpus::Document>& train,
                          const TrainConfig& cfg, std::ostream* log = nullptr);

// Stage 2: full model, loss alpha * L_IS + L_Sum. Trains the configured
// subsets in succession, checkpoints after each, keeps the top_k by
// validation loss (ties: earlier subset). Returns the kept checkpoints
// sorted ascending by validation loss.
std::vector<CheckpointInfo> finetune_stage(model::ModelParams& model,
                                           const std::vector<corpus::Document>& train,
                                           const std::vector<corpus::Document>& val,
                                           const TrainConfig& cfg, const std::string& out_dir,
                                           std::ostream* log = nullptr);

// Mean over documents of (summarization + alpha * distillation).
double validation_loss(const model::ModelParams& params, const std::vector<corpus::Document>& docs,
                       const model::Teacher& teacher, double alpha, double tau);

// Inference products for one document under the configured gate mode.
struct DocOutputs {
  nn::Tensor memory;
  nn::Tensor gate;
  std::vector<double> image_scores;  // student scores, empty when no images
};
DocOutputs document_forward(const model::ModelParams& params, const corpus::Document& doc);

// Generation + selection + scoring over a corpus split. Image precision
// averages over the documents that carry reference images.
metrics::EvalReport evaluate_model(const model::ModelParams& params,
                                   const std::vector<corpus::Document>& docs,
                                   std::size_t beam_size);

}  // namespace mmsum::train
