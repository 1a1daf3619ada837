#include "mmsum/train/training.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include "mmsum/nn/adam.hpp"
#include "mmsum/nn/rng.hpp"

using namespace mmsum::nn;
using mmsum::corpus::Document;
using mmsum::model::ModelParams;
using mmsum::model::Teacher;
namespace special = mmsum::corpus::special;
namespace fs = std::filesystem;

namespace mmsum::train {

void TrainConfig::validate() const {
  check(alpha >= 0.0, "train config: alpha must be >= 0");
  check(tau > 0.0, "train config: tau must be > 0");
  check(learning_rate > 0.0, "train config: learning rate must be > 0");
  check(batch_size >= 1, "train config: batch size must be >= 1");
  check(n_subsets >= 1, "train config: n_subsets must be >= 1");
  check(top_k_checkpoints >= 1, "train config: top_k_checkpoints must be >= 1");
}

namespace {

std::vector<corpus::TokenId> target_with_eos(const ModelParams& params, const Document& doc) {
  check(!doc.summary.empty(), "training: document " + doc.id + " has an empty summary");
  check(doc.summary.size() <= params.cfg.max_summary_len,
        "training: document " + doc.id + " summary length " + std::to_string(doc.summary.size()) +
            " exceeds max_summary_len " + std::to_string(params.cfg.max_summary_len));
  std::vector<corpus::TokenId> target = doc.summary;
  target.push_back(special::eos);
  return target;
}

void abort_on_nonfinite(const Tensor& loss, std::size_t step) {
  if (loss.all_finite()) return;
  fail("non-finite loss at step " + std::to_string(step) +
       "; first non-finite tensor: " + first_nonfinite(loss));
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i-- > 1;) std::swap(idx[i], idx[rng.below(i + 1)]);
}

// Left-fold sum of scalar losses (fixed order keeps runs bit-identical).
Tensor sum_scalars(const std::vector<Tensor>& parts) {
  Tensor total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  return total;
}

// Temporarily restricts requires_grad to a named subset of parameters.
struct FreezeGuard {
  ModelParams& model;
  explicit FreezeGuard(ModelParams& m, const std::vector<std::string>& keep) : model(m) {
    for (auto& [name, t] : model.entries)
      t.set_requires_grad(std::find(keep.begin(), keep.end(), name) != keep.end());
  }
  ~FreezeGuard() {
    for (auto& [name, t] : model.entries) t.set_requires_grad(true);
  }
};

}  // namespace

Tensor stage1_doc_loss(const ModelParams& params, const Document& doc) {
  model::EncoderOutput enc = model::encode_document(params, doc, /*entity_pass=*/false);
  Tensor memory = model::decoder_memory(enc.text_states, enc.visual_ti);
  return model::summarization_loss(params, memory, target_with_eos(params, doc));
}

DocLosses stage2_doc_losses(const ModelParams& params, const Document& doc,
                            const Teacher& teacher, double tau) {
  model::EncoderOutput enc = model::encode_document(params, doc, /*entity_pass=*/true);
  Tensor gate = model::gate_value(params, enc);

  DocLosses out;
  out.gate_value = gate.data()[0];
  Tensor fused = doc.images.empty() ? Tensor::zeros({0, params.cfg.d_model})
                                    : model::fuse_images(enc.visual_ti, enc.visual_ei, gate);
  Tensor memory = model::decoder_memory(enc.text_states, fused);
  out.summarization = model::summarization_loss(params, memory, target_with_eos(params, doc));
  if (!doc.images.empty()) {
    Tensor student = model::score_images(params, enc.cls_ti, enc.cls_ei, gate);
    out.distillation = model::kd_loss(student, teacher.score(doc.summary, doc.images), tau);
  }
  return out;
}

BatchLosses stage2_batch_losses(const ModelParams& params, const std::vector<Document>& docs,
                                const std::vector<std::size_t>& batch, const Teacher& teacher,
                                double alpha, double tau) {
  check(!batch.empty(), "stage2_batch_losses: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<Tensor> sums, kds;
  BatchLosses out;
  for (std::size_t di : batch) {
    DocLosses dl = stage2_doc_losses(params, docs[di], teacher, tau);
    sums.push_back(dl.summarization);
    if (dl.distillation.defined()) kds.push_back(dl.distillation);
    out.gate_mean += dl.gate_value;
    out.target_tokens += docs[di].summary.size() + 1;
  }
  out.gate_mean *= inv;
  out.summarization = scale(sum_scalars(sums), inv);
  out.distillation = kds.empty() ? Tensor::zeros({1}) : scale(sum_scalars(kds), inv);
  out.total = alpha == 0.0 ? out.summarization : add(scale(out.distillation, alpha), out.summarization);
  return out;
}

void modal_matching_stage(ModelParams& model, const std::vector<Document>& train,
                          const TrainConfig& cfg, std::ostream* log) {
  check(cfg.stage == Stage::modal_matching, "modal_matching_stage: config stage mismatch");
  cfg.validate();
  check(!train.empty() || cfg.epochs == 0, "modal_matching_stage: no training documents");

  const std::vector<std::string> trainable_names{"enc.W_v", "enc.v_cls"};
  FreezeGuard freeze(model, trainable_names);
  std::vector<Tensor> trainable{model.at("enc.W_v"), model.at("enc.v_cls")};
  AdamState opt = AdamState::init(trainable, cfg.learning_rate);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), b + cfg.batch_size);
      std::vector<Tensor> losses;
      for (std::size_t i = b; i < hi; ++i) losses.push_back(stage1_doc_loss(model, train[order[i]]));
      Tensor total = scale(sum_scalars(losses), 1.0 / static_cast<double>(hi - b));
      ++step;
      abort_on_nonfinite(total, step);
      auto grads = grad(total, trainable);
      adam_step(trainable, grads, opt);
      if (log) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "stage=1 step=%zu epoch=%zu loss=%.6f\n", step, epoch,
                      total.item());
        (*log) << buf;
      }
    }
  }
}

std::vector<CheckpointInfo> finetune_stage(ModelParams& model, const std::vector<Document>& train,
                                           const std::vector<Document>& val,
                                           const TrainConfig& cfg, const std::string& out_dir,
                                           std::ostream* log) {
  check(cfg.stage == Stage::finetune, "finetune_stage: config stage mismatch");
  cfg.validate();
  check(!train.empty(), "finetune_stage: no training documents");
  check(cfg.n_subsets <= train.size(), "finetune_stage: more subsets than documents");
  fs::create_directories(out_dir);

  auto teacher = model::make_teacher(cfg.teacher, model.cfg.vocab_size, model.cfg.d_q,
                                     cfg.teacher_seed);
  std::vector<Tensor> all_params = model.tensors();
  AdamState opt = AdamState::init(all_params, cfg.learning_rate);
  Rng rng(cfg.seed);

  // Contiguous subset split; training proceeds through the subsets in
  // succession, continuing from the previous subset's weights.
  std::vector<std::vector<std::size_t>> subsets(cfg.n_subsets);
  for (std::size_t i = 0; i < train.size(); ++i)
    subsets[i * cfg.n_subsets / train.size()].push_back(i);

  std::vector<CheckpointInfo> infos;
  std::size_t step = 0;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    auto order = subsets[s];
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_indices(order, rng);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        const std::size_t hi = std::min(order.size(), b + cfg.batch_size);
        const std::vector<std::size_t> batch(order.begin() + static_cast<long>(b),
                                             order.begin() + static_cast<long>(hi));
        BatchLosses bl = stage2_batch_losses(model, train, batch, *teacher, cfg.alpha, cfg.tau);
        ++step;
        abort_on_nonfinite(bl.total, step);
        auto grads = grad(bl.total, all_params);
        adam_step(all_params, grads, opt);
        if (log) {
          char buf[256];
          if (cfg.log_mean_per_token) {
            std::snprintf(buf, sizeof(buf),
                          "stage=2 step=%zu subset=%zu epoch=%zu l_sum=%.6f l_is=%.6f "
                          "w_te_mean=%.4f total=%.6f l_sum_per_token=%.6f\n",
                          step, s, epoch, bl.summarization.item(), bl.distillation.item(),
                          bl.gate_mean, bl.total.item(),
                          bl.summarization.item() * static_cast<double>(batch.size()) /
                              static_cast<double>(bl.target_tokens));
          } else {
            std::snprintf(buf, sizeof(buf),
                          "stage=2 step=%zu subset=%zu epoch=%zu l_sum=%.6f l_is=%.6f "
                          "w_te_mean=%.4f total=%.6f\n",
                          step, s, epoch, bl.summarization.item(), bl.distillation.item(),
                          bl.gate_mean, bl.total.item());
          }
          (*log) << buf;
        }
      }
    }
    const auto& val_split = val.empty() ? train : val;
    const double vloss = validation_loss(model, val_split, *teacher, cfg.alpha, cfg.tau);
    char name[64];
    std::snprintf(name, sizeof(name), "ckpt-subset-%03zu.mmck", s);
    const std::string path = (fs::path(out_dir) / name).string();
    model::save_checkpoint(model, path);
    infos.push_back({path, vloss, s});
    if (log) {
      char buf[192];
      std::snprintf(buf, sizeof(buf), "checkpoint subset=%zu path=%s val_loss=%.6f\n", s,
                    path.c_str(), vloss);
      (*log) << buf;
    }
  }

  std::stable_sort(infos.begin(), infos.end(), [](const CheckpointInfo& a, const CheckpointInfo& b) {
    if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
    return a.subset < b.subset;
  });
  while (infos.size() > cfg.top_k_checkpoints) {
    fs::remove(infos.back().path);
    infos.pop_back();
  }
  return infos;
}

double validation_loss(const ModelParams& params, const std::vector<Document>& docs,
                       const Teacher& teacher, double alpha, double tau) {
  check(!docs.empty(), "validation_loss: empty split");
  NoGradGuard inference;
  double total = 0.0;
  for (const auto& doc : docs) {
    DocLosses dl = stage2_doc_losses(params, doc, teacher, tau);
    total += dl.summarization.item();
    if (dl.distillation.defined()) total += alpha * dl.distillation.item();
  }
  return total / static_cast<double>(docs.size());
}

DocOutputs document_forward(const ModelParams& params, const Document& doc) {
  model::EncoderOutput enc = model::encode_document(params, doc, /*entity_pass=*/true);
  Tensor gate = model::gate_value(params, enc);
  DocOutputs out;
  out.gate = gate;
  Tensor fused = doc.images.empty() ? Tensor::zeros({0, params.cfg.d_model})
                                    : model::fuse_images(enc.visual_ti, enc.visual_ei, gate);
  out.memory = model::decoder_memory(enc.text_states, fused);
  if (!doc.images.empty())
    out.image_scores = model::score_images(params, enc.cls_ti, enc.cls_ei, gate).data();
  return out;
}

metrics::EvalReport evaluate_model(const ModelParams& params, const std::vector<Document>& docs,
                                   std::size_t beam_size) {
  check(!docs.empty(), "evaluate_model: empty split");
  NoGradGuard inference;
  metrics::EvalReport report;
  report.n_documents = docs.size();
  std::size_t with_refs = 0;
  for (const auto& doc : docs) {
    DocOutputs fwd = document_forward(params, doc);
    const auto hyp = model::beam_search(params, fwd.memory, beam_size, params.cfg.max_summary_len);
    report.rouge1_f += metrics::rouge_n(hyp, doc.summary, 1);
    report.rouge2_f += metrics::rouge_n(hyp, doc.summary, 2);
    report.rougeL_f += metrics::rouge_l(hyp, doc.summary);
    if (doc.reference_images && !fwd.image_scores.empty()) {
      const auto selected = static_cast<std::int32_t>(model::select_image(fwd.image_scores));
      report.image_precision += metrics::image_precision({selected}, *doc.reference_images);
      ++with_refs;
    }
  }
  const auto n = static_cast<double>(docs.size());
  report.rouge1_f /= n;
  report.rouge2_f /= n;
  report.rougeL_f /= n;
  if (with_refs > 0) report.image_precision /= static_cast<double>(with_refs);
  return report;
}

}  // namespace mmsum::train
