#include "mmsum/model/params.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "mmsum/nn/checkpoint.hpp"
#include "mmsum/nn/rng.hpp"

using namespace mmsum::nn;

namespace mmsum::model {

std::string to_string(GateMode m) {
  switch (m) {
    case GateMode::learned: return "learned";
    case GateMode::fixed_one: return "fixed_one";
    case GateMode::fixed_zero: return "fixed_zero";
  }
  fail("bad gate mode");
}

GateMode gate_mode_from(const std::string& s) {
  if (s == "learned") return GateMode::learned;
  if (s == "fixed_one") return GateMode::fixed_one;
  if (s == "fixed_zero") return GateMode::fixed_zero;
  fail("unknown gate mode '" + s + "' (learned|fixed_one|fixed_zero)");
}

void ModelConfig::validate() const {
  check(vocab_size > 6, "config: vocab_size must exceed the reserved ids");
  check(d_model >= 1 && n_heads >= 1 && d_model % n_heads == 0,
        "config: d_model must be a positive multiple of n_heads");
  check(n_enc_layers >= 1 && n_dec_layers >= 1 && d_ffn >= 1, "config: layer sizes must be positive");
  check(d_entity >= 1 && n_entities >= 1, "config: entity table must be non-empty");
  check(d_q >= 1 && n_queries >= 1, "config: image feature dims must be positive");
  check(max_context >= 4 && max_summary_len >= 1 && max_images >= 1, "config: budgets too small");
  check(ln_eps > 0.0, "config: ln_eps must be positive");
}

std::string ModelConfig::fingerprint() const {
  char eps[32];
  std::snprintf(eps, sizeof(eps), "%.17g", ln_eps);
  std::ostringstream os;
  os << "d_entity=" << d_entity << ";d_ffn=" << d_ffn << ";d_model=" << d_model
     << ";d_q=" << d_q << ";gate_mode=" << to_string(gate_mode) << ";ln_eps=" << eps
     << ";max_context=" << max_context << ";max_images=" << max_images
     << ";max_summary_len=" << max_summary_len << ";n_dec_layers=" << n_dec_layers
     << ";n_enc_layers=" << n_enc_layers << ";n_entities=" << n_entities
     << ";n_heads=" << n_heads << ";n_queries=" << n_queries << ";vocab_size=" << vocab_size;
  return os.str();
}

ModelConfig ModelConfig::from_fingerprint(const std::string& fp) {
  std::map<std::string, std::string> kv;
  std::istringstream is(fp);
  std::string item;
  while (std::getline(is, item, ';')) {
    const auto eq = item.find('=');
    check(eq != std::string::npos, "bad config fingerprint item '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto num = [&](const char* key) -> std::size_t {
    auto it = kv.find(key);
    check(it != kv.end(), std::string("config fingerprint missing ") + key);
    return std::stoul(it->second);
  };
  ModelConfig c;
  c.d_entity = num("d_entity");
  c.d_ffn = num("d_ffn");
  c.d_model = num("d_model");
  c.d_q = num("d_q");
  c.gate_mode = gate_mode_from(kv.at("gate_mode"));
  c.ln_eps = std::stod(kv.at("ln_eps"));
  c.max_context = num("max_context");
  c.max_images = num("max_images");
  c.max_summary_len = num("max_summary_len");
  c.n_dec_layers = num("n_dec_layers");
  c.n_enc_layers = num("n_enc_layers");
  c.n_entities = num("n_entities");
  c.n_heads = num("n_heads");
  c.n_queries = num("n_queries");
  c.vocab_size = num("vocab_size");
  c.validate();
  return c;
}

namespace {

enum class Init { glorot, embed, zeros, ones };

struct ParamDef {
  std::string name;
  Shape shape;
  Init init;
};

// Fixed declaration order; initialization draws follow this order, so a
// given (config, seed) pair always produces the same parameter values.
std::vector<ParamDef> param_defs(const ModelConfig& c) {
  std::vector<ParamDef> defs;
  auto p = [&](std::string name, Shape shape, Init init) {
    defs.push_back({std::move(name), std::move(shape), init});
  };
  p("enc.W_t", {c.vocab_size, c.d_model}, Init::embed);
  p("enc.W_v", {c.d_q, c.d_model}, Init::glorot);
  p("enc.W_e1", {c.n_entities, c.d_entity}, Init::embed);
  p("enc.W_e2", {c.d_entity, c.d_model}, Init::glorot);
  p("enc.v_cls", {1, c.d_model}, Init::embed);
  p("enc.k_cls", {1, c.d_entity}, Init::embed);
  p("enc.pos_intra", {c.n_queries + 1, c.d_model}, Init::embed);
  p("enc.pos_multi", {c.max_context, c.d_model}, Init::embed);
  auto attn = [&](const std::string& prefix) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) p(prefix + "." + w, {c.d_model, c.d_model}, Init::glorot);
    for (const char* b : {"bq", "bk", "bv", "bo"}) p(prefix + "." + b, {1, c.d_model}, Init::zeros);
  };
  auto ln = [&](const std::string& prefix) {
    p(prefix + ".g", {1, c.d_model}, Init::ones);
    p(prefix + ".b", {1, c.d_model}, Init::zeros);
  };
  auto ffn = [&](const std::string& prefix) {
    p(prefix + ".w1", {c.d_model, c.d_ffn}, Init::glorot);
    p(prefix + ".b1", {1, c.d_ffn}, Init::zeros);
    p(prefix + ".w2", {c.d_ffn, c.d_model}, Init::glorot);
    p(prefix + ".b2", {1, c.d_model}, Init::zeros);
  };
  for (std::size_t i = 0; i < c.n_enc_layers; ++i) {
    const std::string base = "enc.layers." + std::to_string(i);
    attn(base + ".attn");
    ln(base + ".ln1");
    ffn(base + ".ffn");
    ln(base + ".ln2");
  }
  p("dec.pos", {c.max_summary_len + 1, c.d_model}, Init::embed);
  for (std::size_t i = 0; i < c.n_dec_layers; ++i) {
    const std::string base = "dec.layers." + std::to_string(i);
    attn(base + ".self");
    ln(base + ".ln1");
    attn(base + ".cross");
    ln(base + ".ln2");
    ffn(base + ".ffn");
    ln(base + ".ln3");
  }
  p("gate.w1", {2 * c.d_model, c.d_model}, Init::glorot);
  p("gate.b1", {1, c.d_model}, Init::zeros);
  p("gate.w2", {c.d_model, 1}, Init::glorot);
  p("gate.b2", {1, 1}, Init::zeros);
  for (const char* head : {"sel.text", "sel.ent"}) {
    p(std::string(head) + ".w1", {c.d_model, c.d_model}, Init::glorot);
    p(std::string(head) + ".b1", {1, c.d_model}, Init::zeros);
    p(std::string(head) + ".w2", {c.d_model, 1}, Init::glorot);
    p(std::string(head) + ".b2", {1, 1}, Init::zeros);
  }
  return defs;
}

}  // namespace

nn::Tensor& ModelParams::at(const std::string& name) {
  for (auto& [n, t] : entries)
    if (n == name) return t;
  fail("model has no parameter named " + name);
}

const nn::Tensor& ModelParams::at(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return t;
  fail("model has no parameter named " + name);
}

bool ModelParams::has(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return true;
  return false;
}

std::vector<nn::Tensor> ModelParams::tensors() const {
  std::vector<nn::Tensor> out;
  out.reserve(entries.size());
  for (const auto& [n, t] : entries) out.push_back(t);
  return out;
}

ModelParams ModelParams::skeleton(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams m;
  m.cfg = cfg;
  for (const auto& def : param_defs(cfg)) {
    Tensor t = Tensor::zeros(def.shape, true);
    t.set_tag(def.name);
    m.entries.emplace_back(def.name, std::move(t));
  }
  return m;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed,
                              const std::vector<double>* transe_entities) {
  cfg.validate();
  ModelParams m;
  m.cfg = cfg;
  m.seed = seed;
  Rng rng(seed);
  for (const auto& def : param_defs(cfg)) {
    Tensor t;
    switch (def.init) {
      case Init::glorot: t = Tensor::glorot(def.shape[0], def.shape[1], rng); break;
      case Init::embed: t = Tensor::gaussian(def.shape, rng, 0.02); break;
      case Init::zeros: t = Tensor::zeros(def.shape, true); break;
      case Init::ones: t = Tensor::full(def.shape, 1.0, true); break;
    }
    t.set_tag(def.name);
    m.entries.emplace_back(def.name, std::move(t));
  }

  // Entity embedding table: external translation-trained rows, or random
  // rows normalized the same way that trainer leaves them.
  Tensor& w_e1 = m.at("enc.W_e1");
  if (transe_entities) {
    check(transe_entities->size() == cfg.n_entities * cfg.d_entity,
          "init: entity table size mismatch, expected " +
              std::to_string(cfg.n_entities * cfg.d_entity) + " values, got " +
              std::to_string(transe_entities->size()));
    w_e1.mutable_data() = *transe_entities;
  } else {
    auto& d = w_e1.mutable_data();
    for (std::size_t r = 0; r < cfg.n_entities; ++r) {
      double n = 0.0;
      for (std::size_t j = 0; j < cfg.d_entity; ++j) n += d[r * cfg.d_entity + j] * d[r * cfg.d_entity + j];
      n = std::sqrt(n);
      if (n > 0)
        for (std::size_t j = 0; j < cfg.d_entity; ++j) d[r * cfg.d_entity + j] /= n;
    }
  }
  return m;
}

void save_checkpoint(const ModelParams& model, const std::string& path) {
  NamedArrays na;
  na.put_string("meta.config", model.cfg.fingerprint());
  na.put_u64("meta.seed", model.seed);
  for (const auto& [name, t] : model.entries) na.put(name, t.shape(), t.data());
  save_named_arrays(na, path);
}

ModelParams load_checkpoint(const std::string& path) {
  NamedArrays na = load_named_arrays(path);
  ModelParams m = ModelParams::skeleton(ModelConfig::from_fingerprint(na.get_string("meta.config")));
  m.seed = na.get_u64("meta.seed");
  std::set<std::string> consumed;
  for (auto& [name, t] : m.entries) {
    const auto& arr = na.get(name);
    check(arr.shape == t.shape(), "checkpoint load: shape conflict for " + name + ": file has " +
                                      shape_str(arr.shape) + ", model expects " +
                                      shape_str(t.shape()));
    t.mutable_data() = arr.data;
    consumed.insert(name);
  }
  for (const auto& [name, arr] : na.arrays)
    check(consumed.count(name) == 1, "checkpoint load: unexpected array " + name);
  return m;
}

void load_checkpoint_into(ModelParams& model, const std::string& path) {
  NamedArrays na = load_named_arrays(path);
  const std::string fp = na.get_string("meta.config");
  for (auto& [name, t] : model.entries) {
    const auto& arr = na.get(name);
    check(arr.shape == t.shape(), "checkpoint load: shape conflict for " + name + ": file has " +
                                      shape_str(arr.shape) + ", model expects " +
                                      shape_str(t.shape()));
  }
  check(fp == model.cfg.fingerprint(),
        "checkpoint load: config mismatch\n  file:  " + fp + "\n  model: " + model.cfg.fingerprint());
  for (auto& [name, t] : model.entries) t.mutable_data() = na.get(name).data;
  model.seed = na.get_u64("meta.seed");
}

}  // namespace mmsum::model
