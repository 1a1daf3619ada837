#pragma once

#include <vector>

#include "mmsum/corpus/corpus.hpp"
#include "mmsum/model/encoder.hpp"
#include "mmsum/model/params.hpp"
#include "mmsum/nn/tensor.hpp"

namespace mmsum::model {

// Learned scalar gate in (0,1): mean-pooled text states concatenated with
// mean-pooled entity states, then a two-layer MLP with a sigmoid output.
// One scalar per document, shared between fusion and image scoring.
nn::Tensor gate_weight(const ModelParams& params, const nn::Tensor& text_states,
                       const nn::Tensor& entity_states);

// Gate value honoring the configured mode: learned, or clamped to the
// ablation constants 1 / 0.
nn::Tensor gate_value(const ModelParams& params, const EncoderOutput& enc);

// Convex combination w * h_ti + (1 - w) * h_ei, elementwise.
nn::Tensor fuse_images(const nn::Tensor& h_visual_ti, const nn::Tensor& h_visual_ei,
                       const nn::Tensor& w);

// Cross-attention memory: text states followed by the fused visual rows.
nn::Tensor decoder_memory(const nn::Tensor& text_states, const nn::Tensor& fused_visual);

// Causal decoder stack over already-generated tokens with cross-attention
// into `memory`; returns one hidden state per input position.
nn::Tensor decoder_states(const ModelParams& params, const nn::Tensor& memory,
                          const std::vector<corpus::TokenId>& input_tokens);

// Vocabulary logits; the output projection is tied to the token table.
nn::Tensor token_logits(const ModelParams& params, const nn::Tensor& states);

// Teacher-forced negative log-likelihood, summed over target positions.
// The decoder input is the target shifted right behind the start token.
nn::Tensor summarization_loss(const ModelParams& params, const nn::Tensor& memory,
                              const std::vector<corpus::TokenId>& target);

// Length-normalized beam search (normalization exponent 1). Ties break
// toward lexicographically smaller token sequences. Returns generated
// tokens without start/end markers; an immediate end token yields [].
std::vector<corpus::TokenId> beam_search(const ModelParams& params, const nn::Tensor& memory,
                                         std::size_t beam_size, std::size_t max_len);

std::vector<corpus::TokenId> greedy_decode(const ModelParams& params, const nn::Tensor& memory,
                                           std::size_t max_len);

}  // namespace mmsum::model
