#include "mmsum/model/image_selection.hpp"

#include <algorithm>
#include <cmath>

#include "mmsum/nn/rng.hpp"

using namespace mmsum::nn;

namespace mmsum::model {

ToyTeacher::ToyTeacher(std::size_t vocab_size, std::size_t d_q, std::uint64_t seed)
    : vocab_size_(vocab_size), d_q_(d_q) {
  check(vocab_size >= 1 && d_q >= 1, "toy teacher: sizes must be positive");
  Rng rng(seed);
  token_table_.resize(vocab_size * d_q);
  for (double& v : token_table_) v = rng.normal(0.0, 1.0);
  image_proj_.resize(d_q * d_q);
  const double s = 1.0 / std::sqrt(static_cast<double>(d_q));
  for (double& v : image_proj_) v = rng.normal(0.0, s);
}

std::vector<double> ToyTeacher::text_vector(const std::vector<corpus::TokenId>& summary) const {
  std::vector<double> v(d_q_, 0.0);
  if (summary.empty()) return v;
  for (corpus::TokenId t : summary) {
    check(t >= 0 && static_cast<std::size_t>(t) < vocab_size_, "toy teacher: token id out of range");
    for (std::size_t j = 0; j < d_q_; ++j) v[j] += token_table_[static_cast<std::size_t>(t) * d_q_ + j];
  }
  for (double& x : v) x /= static_cast<double>(summary.size());
  return v;
}

std::vector<double> ToyTeacher::image_vector(const corpus::ImageFeatures& img) const {
  check(img.d_q == d_q_, "toy teacher: feature width " + std::to_string(img.d_q) +
                             " does not match teacher dim " + std::to_string(d_q_));
  check(img.n_queries >= 1, "toy teacher: empty feature block");
  std::vector<double> mean(d_q_, 0.0);
  for (std::size_t q = 0; q < img.n_queries; ++q)
    for (std::size_t j = 0; j < d_q_; ++j) mean[j] += img.data[q * d_q_ + j];
  for (double& x : mean) x /= static_cast<double>(img.n_queries);
  std::vector<double> out(d_q_, 0.0);
  for (std::size_t k = 0; k < d_q_; ++k) {
    const double m = mean[k];
    if (m == 0.0) continue;
    for (std::size_t j = 0; j < d_q_; ++j) out[j] += m * image_proj_[k * d_q_ + j];
  }
  return out;
}

std::vector<double> ToyTeacher::score(const std::vector<corpus::TokenId>& summary,
                                      const std::vector<corpus::ImageFeatures>& images) const {
  const std::vector<double> tv = text_vector(summary);
  std::vector<double> scores;
  scores.reserve(images.size());
  for (const auto& img : images) scores.push_back(cosine_similarity(tv, image_vector(img)));
  return scores;
}

std::unique_ptr<Teacher> make_teacher(const std::string& name, std::size_t vocab_size,
                                      std::size_t d_q, std::uint64_t seed) {
  if (name == "toy") return std::make_unique<ToyTeacher>(vocab_size, d_q, seed);
  fail("unknown teacher '" + name + "' (known: toy)");
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  check(a.size() == b.size(), "cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {
Tensor score_head(const ModelParams& p, const std::string& prefix, const Tensor& cls_state) {
  Tensor hidden = relu(add(matmul(cls_state, p.at(prefix + ".w1")), p.at(prefix + ".b1")));
  return add(matmul(hidden, p.at(prefix + ".w2")), p.at(prefix + ".b2"));  // [1,1]
}
}  // namespace

Tensor score_images(const ModelParams& params, const std::vector<Tensor>& cls_text_image,
                    const std::vector<Tensor>& cls_entity_image, const Tensor& gate) {
  check(!cls_text_image.empty(), "score_images: no images to score");
  check(cls_text_image.size() == cls_entity_image.size(),
        "score_images: CLS state lists differ in length");
  Tensor complement = sub(Tensor::scalar(1.0), gate);
  std::vector<Tensor> per_image;
  per_image.reserve(cls_text_image.size());
  for (std::size_t i = 0; i < cls_text_image.size(); ++i) {
    Tensor g_ti = score_head(params, "sel.text", cls_text_image[i]);
    Tensor g_ei = score_head(params, "sel.ent", cls_entity_image[i]);
    per_image.push_back(add(mul(gate, g_ti), mul(complement, g_ei)));
  }
  return concat_cols(per_image);  // [1, M]
}

Tensor kd_loss(const Tensor& student_scores, const std::vector<double>& teacher_scores,
               double tau) {
  check(tau > 0.0, "kd_loss: temperature must be positive");
  const std::size_t m = student_scores.size();
  check(m >= 1 && m == teacher_scores.size(),
        "kd_loss: score lists must be non-empty and equally long");

  // Q = softmax(teacher / tau), computed stably as a constant.
  std::vector<double> log_q(m);
  double mx = teacher_scores[0] / tau;
  for (std::size_t i = 1; i < m; ++i) mx = std::max(mx, teacher_scores[i] / tau);
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) z += std::exp(teacher_scores[i] / tau - mx);
  const double lse = mx + std::log(z);
  for (std::size_t i = 0; i < m; ++i) log_q[i] = teacher_scores[i] / tau - lse;

  Tensor log_q_const = Tensor::from(student_scores.shape(), std::move(log_q));
  Tensor log_p = log_softmax(scale(student_scores, 1.0 / tau));
  Tensor p = exp(log_p);
  return sum_all(mul(p, sub(log_p, log_q_const)));
}

std::size_t select_image(const std::vector<double>& scores) {
  check(!scores.empty(), "select_image: no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

}  // namespace mmsum::model
