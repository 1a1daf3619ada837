#include "mmsum/model/encoder.hpp"

#include <algorithm>
#include <cmath>

using namespace mmsum::nn;
using mmsum::corpus::Document;
using mmsum::corpus::EntityMention;
using mmsum::corpus::ImageFeatures;
using mmsum::corpus::TokenId;

namespace mmsum::model {

namespace detail {

Tensor multi_head_attention(const ModelParams& params, const std::string& prefix,
                            const Tensor& query_in, const Tensor& kv_in, bool causal) {
  const std::size_t heads = params.cfg.n_heads;
  const std::size_t hd = params.cfg.head_dim();
  const std::size_t nq = query_in.rows();
  const std::size_t nk = kv_in.rows();

  Tensor q = add(matmul(query_in, params.at(prefix + ".wq")), params.at(prefix + ".bq"));
  Tensor k = add(matmul(kv_in, params.at(prefix + ".wk")), params.at(prefix + ".bk"));
  Tensor v = add(matmul(kv_in, params.at(prefix + ".wv")), params.at(prefix + ".bv"));

  Tensor mask;
  if (causal) {
    check(nq == nk, "causal attention requires square scores");
    std::vector<double> m(nq * nk, 0.0);
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j = i + 1; j < nk; ++j) m[i * nk + j] = -1e9;
    mask = Tensor::from({nq, nk}, std::move(m));
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice(q, 0, nq, h * hd, (h + 1) * hd);
    Tensor kh = slice(k, 0, nk, h * hd, (h + 1) * hd);
    Tensor vh = slice(v, 0, nk, h * hd, (h + 1) * hd);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (causal) scores = add(scores, mask);
    head_outputs.push_back(matmul(softmax(scores), vh));
  }
  Tensor cat = heads == 1 ? head_outputs[0] : concat_cols(head_outputs);
  return add(matmul(cat, params.at(prefix + ".wo")), params.at(prefix + ".bo"));
}

Tensor ffn_block(const ModelParams& params, const std::string& prefix, const Tensor& x) {
  Tensor hidden = relu(add(matmul(x, params.at(prefix + ".w1")), params.at(prefix + ".b1")));
  return add(matmul(hidden, params.at(prefix + ".w2")), params.at(prefix + ".b2"));
}

Tensor ln_affine(const ModelParams& params, const std::string& prefix, const Tensor& x) {
  Tensor normed = layer_norm(x, params.cfg.ln_eps);
  return add(mul(normed, params.at(prefix + ".g")), params.at(prefix + ".b"));
}

}  // namespace detail

Tensor embed_text(const ModelParams& params,
                  const std::vector<std::vector<TokenId>>& sentences) {
  Ids ids;
  if (sentences.empty()) {
    ids = {corpus::special::text_cls, corpus::special::text_sep};
  } else {
    for (const auto& sent : sentences) {
      ids.push_back(corpus::special::text_cls);
      ids.insert(ids.end(), sent.begin(), sent.end());
      ids.push_back(corpus::special::text_sep);
    }
  }
  return embedding(params.at("enc.W_t"), ids);
}

Tensor embed_images(const ModelParams& params, const std::vector<ImageFeatures>& images) {
  const auto& cfg = params.cfg;
  check(images.size() <= cfg.max_images, "embed_images: " + std::to_string(images.size()) +
                                             " images exceed max_images " +
                                             std::to_string(cfg.max_images));
  if (images.empty()) return Tensor::zeros({0, cfg.d_model});

  const Tensor& w_v = params.at("enc.W_v");
  const Tensor& v_cls = params.at("enc.v_cls");
  const Tensor& pos = params.at("enc.pos_intra");
  std::vector<Tensor> blocks;
  blocks.reserve(images.size());
  for (const auto& img : images) {
    check(img.d_q == cfg.d_q, "embed_images: feature width " + std::to_string(img.d_q) +
                                  " does not match configured d_q " + std::to_string(cfg.d_q));
    check(img.n_queries == cfg.n_queries,
          "embed_images: feature row count " + std::to_string(img.n_queries) +
              " does not match configured n_queries " + std::to_string(cfg.n_queries));
    Tensor features = Tensor::from({img.n_queries, img.d_q}, img.data);
    Tensor projected = matmul(features, w_v);                 // [Q, d]
    Tensor block = concat_rows({v_cls, projected});           // [Q+1, d]
    blocks.push_back(add(block, pos));
  }
  return blocks.size() == 1 ? blocks[0] : concat_rows(blocks);
}

Tensor embed_entities(const ModelParams& params, const std::vector<EntityMention>& entities) {
  const Tensor& table = params.at("enc.W_e1");
  const Tensor& k_cls = params.at("enc.k_cls");

  // Group mentions by source sentence, preserving order.
  std::vector<Tensor> rows;
  std::int32_t current_sentence = -1;
  Ids group;
  auto flush = [&]() {
    if (!group.empty()) {
      rows.push_back(embedding(table, group));
      group.clear();
    }
  };
  for (const auto& m : entities) {
    check(m.entity >= 0 && static_cast<std::size_t>(m.entity) < params.cfg.n_entities,
          "embed_entities: unknown entity id " + std::to_string(m.entity));
    if (m.sentence != current_sentence) {
      flush();
      rows.push_back(k_cls);
      current_sentence = m.sentence;
    }
    group.push_back(m.entity);
  }
  flush();
  if (rows.empty()) rows.push_back(k_cls);  // lone delimiter
  Tensor stacked = rows.size() == 1 ? rows[0] : concat_rows(rows);
  return matmul(stacked, params.at("enc.W_e2"));
}

std::pair<Tensor, Tensor> encode(const ModelParams& params, const Tensor& lead_part,
                                 const Tensor& visual_part) {
  const std::size_t n_lead = lead_part.rows();
  const std::size_t n_vis = visual_part.rows();
  const std::size_t n = n_lead + n_vis;
  check(n >= 1, "encode: empty input");
  check(n <= params.cfg.max_context, "encode: sequence length " + std::to_string(n) +
                                         " exceeds max_context " +
                                         std::to_string(params.cfg.max_context));

  Tensor x = n_vis == 0 ? lead_part : concat_rows({lead_part, visual_part});
  x = add(x, slice_rows(params.at("enc.pos_multi"), 0, n));
  for (std::size_t layer = 0; layer < params.cfg.n_enc_layers; ++layer) {
    const std::string base = "enc.layers." + std::to_string(layer);
    Tensor attn = detail::multi_head_attention(params, base + ".attn", x, x, /*causal=*/false);
    x = detail::ln_affine(params, base + ".ln1", add(x, attn));
    Tensor ffn = detail::ffn_block(params, base + ".ffn", x);
    x = detail::ln_affine(params, base + ".ln2", add(x, ffn));
  }
  return {slice_rows(x, 0, n_lead), slice_rows(x, n_lead, n)};
}

namespace {

// Drops trailing tokens (and emptied sentences) until the text side fits.
std::vector<std::vector<TokenId>> truncate_sentences(std::vector<std::vector<TokenId>> sentences,
                                                     std::size_t budget_rows,
                                                     std::size_t* dropped) {
  auto rows = [&]() {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size() + 2;
    return std::max<std::size_t>(n, 2);
  };
  while (!sentences.empty() && rows() > budget_rows) {
    auto& last = sentences.back();
    if (last.empty()) {
      sentences.pop_back();
    } else {
      last.pop_back();
      ++*dropped;
    }
  }
  return sentences;
}

}  // namespace

EncoderOutput encode_document(const ModelParams& params, const Document& doc, bool entity_pass) {
  const auto& cfg = params.cfg;
  const std::size_t image_rows = doc.images.size() * (cfg.n_queries + 1);
  check(image_rows + 2 <= cfg.max_context,
        "encode_document: images alone exceed max_context (images are never truncated)");

  EncoderOutput out;
  const std::size_t text_budget = cfg.max_context - image_rows;
  auto sentences = truncate_sentences(doc.sentences, text_budget, &out.truncated_text_tokens);

  Tensor visual_embed = embed_images(params, doc.images);
  Tensor text_embed = embed_text(params, sentences);
  auto [h_text, h_vis_ti] = encode(params, text_embed, visual_embed);
  out.text_states = h_text;
  out.visual_ti = h_vis_ti;

  if (entity_pass) {
    // Entities truncated from the end, after text, never images.
    std::vector<EntityMention> mentions = doc.entities;
    auto entity_rows = [&]() {
      std::size_t groups = 0;
      std::int32_t cur = -1;
      for (const auto& m : mentions)
        if (m.sentence != cur) {
          ++groups;
          cur = m.sentence;
        }
      return mentions.size() + std::max<std::size_t>(groups, 1);
    };
    while (!mentions.empty() && entity_rows() + image_rows > cfg.max_context) {
      mentions.pop_back();
      ++out.truncated_entities;
    }
    Tensor entity_embed = embed_entities(params, mentions);
    auto [h_ent, h_vis_ei] = encode(params, entity_embed, visual_embed);
    out.entity_states = h_ent;
    out.visual_ei = h_vis_ei;
  }

  const std::size_t stride = cfg.n_queries + 1;
  for (std::size_t i = 0; i < doc.images.size(); ++i) {
    out.cls_ti.push_back(slice_rows(out.visual_ti, i * stride, i * stride + 1));
    if (entity_pass)
      out.cls_ei.push_back(slice_rows(out.visual_ei, i * stride, i * stride + 1));
  }
  return out;
}

}  // namespace mmsum::model
