#pragma once

#include <vector>

#include "mmsum/corpus/corpus.hpp"
#include "mmsum/model/params.hpp"
#include "mmsum/nn/tensor.hpp"

namespace mmsum::model {

// Two applications of ONE transformer-encoder parameter set: once over
// (text, images), once over (entities, images). Both halves of each
// output keep their graph connection to the shared weights.
struct EncoderOutput {
  nn::Tensor text_states;     // text rows incl. sentence delimiters, [n_t, d]
  nn::Tensor visual_ti;       // image rows from the text-image pass, [M*(Q+1), d]
  nn::Tensor entity_states;   // entity rows incl. group delimiters, [n_e, d]
  nn::Tensor visual_ei;       // image rows from the entity-image pass
  std::vector<nn::Tensor> cls_ti;  // per-image CLS output rows, [1, d] each
  std::vector<nn::Tensor> cls_ei;
  std::size_t truncated_text_tokens = 0;
  std::size_t truncated_entities = 0;
};

// Per sentence: [t_CLS, tokens..., t_SEP], then token-table lookup.
// Empty text embeds as a single delimiter pair.
nn::Tensor embed_text(const ModelParams& params,
                      const std::vector<std::vector<corpus::TokenId>>& sentences);

// Per image: [v_CLS, W_v * features...] plus intra-image positions;
// M images yield M*(n_queries+1) rows. M = 0 yields an empty block.
nn::Tensor embed_images(const ModelParams& params,
                        const std::vector<corpus::ImageFeatures>& images);

// Entities grouped by source sentence, each group prefixed with the
// k_CLS row, then projected d_entity -> d_model. No entities embeds as
// the lone k_CLS row.
nn::Tensor embed_entities(const ModelParams& params,
                          const std::vector<corpus::EntityMention>& entities);

// Shared encoder application: global positions over the concatenation,
// full bidirectional self-attention, outputs split back into the
// (non-visual, visual) parts. Both passes call exactly this function.
std::pair<nn::Tensor, nn::Tensor> encode(const ModelParams& params, const nn::Tensor& lead_part,
                                         const nn::Tensor& visual_part);

// Full dual-pass application with budget enforcement: text (then
// entities) are truncated from the end to fit max_context, images never.
// With entity_pass=false only the text-image side is computed.
EncoderOutput encode_document(const ModelParams& params, const corpus::Document& doc,
                              bool entity_pass = true);

namespace detail {
// Transformer building blocks shared by the encoder and the decoder.
nn::Tensor multi_head_attention(const ModelParams& params, const std::string& prefix,
                                const nn::Tensor& query_in, const nn::Tensor& kv_in, bool causal);
nn::Tensor ffn_block(const ModelParams& params, const std::string& prefix, const nn::Tensor& x);
nn::Tensor ln_affine(const ModelParams& params, const std::string& prefix, const nn::Tensor& x);
}  // namespace detail

}  // namespace mmsum::model
