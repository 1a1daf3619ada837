#include "mmsum/model/fusion_decoder.hpp"

#include <algorithm>
#include <cmath>

using namespace mmsum::nn;
using mmsum::corpus::TokenId;
namespace special = mmsum::corpus::special;

namespace mmsum::model {

Tensor gate_weight(const ModelParams& params, const Tensor& text_states,
                   const Tensor& entity_states) {
  check(text_states.rows() >= 1, "gate_weight: empty text states");
  check(entity_states.rows() >= 1, "gate_weight: empty entity states");
  Tensor pooled = concat_cols({mean_rows(text_states), mean_rows(entity_states)});  // [1, 2d]
  Tensor hidden = relu(add(matmul(pooled, params.at("gate.w1")), params.at("gate.b1")));
  return sigmoid(add(matmul(hidden, params.at("gate.w2")), params.at("gate.b2")));  // [1,1]
}

Tensor gate_value(const ModelParams& params, const EncoderOutput& enc) {
  switch (params.cfg.gate_mode) {
    case GateMode::learned: return gate_weight(params, enc.text_states, enc.entity_states);
    case GateMode::fixed_one: return Tensor::from({1, 1}, {1.0});
    case GateMode::fixed_zero: return Tensor::from({1, 1}, {0.0});
  }
  fail("bad gate mode");
}

Tensor fuse_images(const Tensor& h_visual_ti, const Tensor& h_visual_ei, const Tensor& w) {
  check(h_visual_ti.shape() == h_visual_ei.shape(),
        "fuse_images: shape mismatch " + shape_str(h_visual_ti.shape()) + " vs " +
            shape_str(h_visual_ei.shape()));
  check(w.size() == 1, "fuse_images: gate must be a scalar");
  const double wv = w.data()[0];
  check(wv >= 0.0 && wv <= 1.0, "fuse_images: gate value outside [0,1]");
  Tensor complement = sub(Tensor::scalar(1.0), w);
  return add(mul(h_visual_ti, w), mul(h_visual_ei, complement));
}

Tensor decoder_memory(const Tensor& text_states, const Tensor& fused_visual) {
  if (fused_visual.rows() == 0) return text_states;
  return concat_rows({text_states, fused_visual});
}

Tensor decoder_states(const ModelParams& params, const Tensor& memory,
                      const std::vector<TokenId>& input_tokens) {
  const auto& cfg = params.cfg;
  check(!input_tokens.empty(), "decoder_states: empty input");
  check(input_tokens.size() <= cfg.max_summary_len + 1,
        "decoder_states: input length " + std::to_string(input_tokens.size()) +
            " exceeds decoder position budget " + std::to_string(cfg.max_summary_len + 1));
  check(memory.rows() >= 1, "decoder_states: empty memory");

  const std::size_t n = input_tokens.size();
  Tensor x = add(embedding(params.at("enc.W_t"), input_tokens),
                 slice_rows(params.at("dec.pos"), 0, n));
  for (std::size_t layer = 0; layer < cfg.n_dec_layers; ++layer) {
    const std::string base = "dec.layers." + std::to_string(layer);
    Tensor self = detail::multi_head_attention(params, base + ".self", x, x, /*causal=*/true);
    x = detail::ln_affine(params, base + ".ln1", add(x, self));
    Tensor cross = detail::multi_head_attention(params, base + ".cross", x, memory, false);
    x = detail::ln_affine(params, base + ".ln2", add(x, cross));
    Tensor ffn = detail::ffn_block(params, base + ".ffn", x);
    x = detail::ln_affine(params, base + ".ln3", add(x, ffn));
  }
  return x;
}

Tensor token_logits(const ModelParams& params, const Tensor& states) {
  return matmul(states, transpose(params.at("enc.W_t")));
}

Tensor summarization_loss(const ModelParams& params, const Tensor& memory,
                          const std::vector<TokenId>& target) {
  check(!target.empty(), "summarization_loss: empty target");
  std::vector<TokenId> input;
  input.reserve(target.size());
  input.push_back(special::bos);
  input.insert(input.end(), target.begin(), target.end() - 1);
  Tensor logits = token_logits(params, decoder_states(params, memory, input));
  return cross_entropy_sum(logits, target);
}

namespace {

struct Hypothesis {
  std::vector<TokenId> tokens;  // generated tokens, possibly ending in eos
  double log_prob = 0.0;
  bool finished = false;

  double normalized() const {
    return log_prob / static_cast<double>(std::max<std::size_t>(tokens.size(), 1));
  }
};

// Final ranking: higher normalized score first; ties toward the
// lexicographically smaller sequence (lower token id, then the prefix,
// i.e. earlier completion).
bool final_better(const Hypothesis& a, const Hypothesis& b) {
  if (a.normalized() != b.normalized()) return a.normalized() > b.normalized();
  return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                                      b.tokens.end());
}

std::vector<double> next_log_probs(const ModelParams& params, const Tensor& memory,
                                   const std::vector<TokenId>& generated) {
  std::vector<TokenId> input;
  input.reserve(generated.size() + 1);
  input.push_back(special::bos);
  input.insert(input.end(), generated.begin(), generated.end());
  Tensor states = decoder_states(params, memory, input);
  Tensor last = slice_rows(states, input.size() - 1, input.size());
  Tensor lp = log_softmax(token_logits(params, last));
  return lp.data();
}

std::vector<TokenId> strip_eos(std::vector<TokenId> tokens) {
  if (!tokens.empty() && tokens.back() == special::eos) tokens.pop_back();
  return tokens;
}

}  // namespace

std::vector<TokenId> beam_search(const ModelParams& params, const Tensor& memory,
                                 std::size_t beam_size, std::size_t max_len) {
  check(beam_size >= 1, "beam_search: beam size must be >= 1");
  check(max_len >= 1, "beam_search: max_len must be >= 1");
  NoGradGuard inference;
  max_len = std::min(max_len, params.cfg.max_summary_len);

  std::vector<Hypothesis> active{{}};
  std::vector<Hypothesis> finished;

  for (std::size_t step = 0; step < max_len && !active.empty(); ++step) {
    struct Candidate {
      double log_prob;
      std::size_t parent;
      TokenId token;
    };
    std::vector<Candidate> pool;
    for (std::size_t b = 0; b < active.size(); ++b) {
      const auto lp = next_log_probs(params, memory, active[b].tokens);
      for (std::size_t t = 0; t < lp.size(); ++t)
        pool.push_back({active[b].log_prob + lp[t], b, static_cast<TokenId>(t)});
    }
    const std::size_t keep = std::min(beam_size, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<long>(keep), pool.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });

    std::vector<Hypothesis> next;
    for (std::size_t c = 0; c < keep; ++c) {
      Hypothesis h = active[pool[c].parent];
      h.tokens.push_back(pool[c].token);
      h.log_prob = pool[c].log_prob;
      if (pool[c].token == special::eos || h.tokens.size() >= max_len) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);
  }
  for (auto& h : active) finished.push_back(std::move(h));
  check(!finished.empty(), "beam_search: no hypotheses");

  const Hypothesis* best = &finished[0];
  for (const auto& h : finished)
    if (final_better(h, *best)) best = &h;
  return strip_eos(best->tokens);
}

std::vector<TokenId> greedy_decode(const ModelParams& params, const Tensor& memory,
                                   std::size_t max_len) {
  NoGradGuard inference;
  max_len = std::min(max_len, params.cfg.max_summary_len);
  std::vector<TokenId> out;
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto lp = next_log_probs(params, memory, out);
    std::size_t best = 0;
    for (std::size_t t = 1; t < lp.size(); ++t)
      if (lp[t] > lp[best]) best = t;
    out.push_back(static_cast<TokenId>(best));
    if (out.back() == special::eos) break;
  }
  return strip_eos(std::move(out));
}

}  // namespace mmsum::model
