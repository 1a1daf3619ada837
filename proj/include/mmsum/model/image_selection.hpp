#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mmsum/corpus/corpus.hpp"
#include "mmsum/model/params.hpp"
#include "mmsum/nn/tensor.hpp"

namespace mmsum::model {

// Distillation teacher contract: a deterministic scorer mapping (summary
// token ids, M image feature blocks) to M finite reals. Implementations
// must be safe to call concurrently across documents.
class Teacher {
 public:
  virtual ~Teacher() = default;
  virtual std::vector<double> score(const std::vector<corpus::TokenId>& summary,
                                    const std::vector<corpus::ImageFeatures>& images) const = 0;
  virtual std::string name() const = 0;
};

// Dependency-free default teacher. Text vector: mean of a frozen seeded
// token-embedding table over the summary tokens. Image vector: frozen
// seeded linear map of the mean feature row. Score: cosine similarity,
// defined as 0 when either vector has zero norm.
class ToyTeacher : public Teacher {
 public:
  ToyTeacher(std::size_t vocab_size, std::size_t d_q, std::uint64_t seed);

  std::vector<double> score(const std::vector<corpus::TokenId>& summary,
                            const std::vector<corpus::ImageFeatures>& images) const override;
  std::string name() const override { return "toy"; }

  std::size_t dim() const { return d_q_; }
  const std::vector<double>& token_table() const { return token_table_; }  // [vocab, d_q]
  const std::vector<double>& image_proj() const { return image_proj_; }    // [d_q, d_q]
  std::vector<double> text_vector(const std::vector<corpus::TokenId>& summary) const;
  std::vector<double> image_vector(const corpus::ImageFeatures& img) const;

 private:
  std::size_t vocab_size_;
  std::size_t d_q_;
  std::vector<double> token_table_;
  std::vector<double> image_proj_;
};

// Teacher registry; "toy" is always available.
std::unique_ptr<Teacher> make_teacher(const std::string& name, std::size_t vocab_size,
                                      std::size_t d_q, std::uint64_t seed);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Student scores g(p): per image, two distinct MLP heads over the
// encoder CLS states, blended with the document's gate weight:
// g = w * g_text(p) + (1 - w) * g_entity(p). Returns a [1, M] tensor.
nn::Tensor score_images(const ModelParams& params, const std::vector<nn::Tensor>& cls_text_image,
                        const std::vector<nn::Tensor>& cls_entity_image, const nn::Tensor& gate);

// KL(P || Q) with P = softmax(student / tau), Q = softmax(teacher / tau).
// Q is a constant; gradients flow through the student scores only.
nn::Tensor kd_loss(const nn::Tensor& student_scores, const std::vector<double>& teacher_scores,
                   double tau);

// Argmax with ties resolved to the lowest index.
std::size_t select_image(const std::vector<double>& scores);

}  // namespace mmsum::model
