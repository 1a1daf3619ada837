#include "mmsum/corpus/transe.hpp"

#include <algorithm>
#include <cmath>

#include "mmsum/nn/checkpoint.hpp"
#include "mmsum/nn/rng.hpp"
#include "mmsum/nn/tensor.hpp"

using mmsum::nn::check;
using mmsum::nn::Rng;

namespace mmsum::corpus {

namespace {

void l2_normalize_rows(std::vector<double>& table, std::size_t rows, std::size_t dim) {
  for (std::size_t r = 0; r < rows; ++r) {
    double n = 0.0;
    for (std::size_t j = 0; j < dim; ++j) n += table[r * dim + j] * table[r * dim + j];
    n = std::sqrt(n);
    if (n > 0.0)
      for (std::size_t j = 0; j < dim; ++j) table[r * dim + j] /= n;
  }
}

double energy_raw(const double* h, const double* r, const double* t, std::size_t dim,
                  double* diff) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    diff[j] = h[j] + r[j] - t[j];
    s += diff[j] * diff[j];
  }
  return std::sqrt(s);
}

}  // namespace

double transe_energy(const TranseTables& tb, std::int32_t h, std::int32_t r, std::int32_t t) {
  check(h >= 0 && static_cast<std::size_t>(h) < tb.n_entities && t >= 0 &&
            static_cast<std::size_t>(t) < tb.n_entities,
        "transe_energy: entity id out of range");
  check(r >= 0 && static_cast<std::size_t>(r) < tb.n_relations,
        "transe_energy: relation id out of range");
  std::vector<double> diff(tb.dim);
  return energy_raw(&tb.entity[static_cast<std::size_t>(h) * tb.dim],
                    &tb.relation[static_cast<std::size_t>(r) * tb.dim],
                    &tb.entity[static_cast<std::size_t>(t) * tb.dim], tb.dim, diff.data());
}

TranseTables train_transe(const TripleStore& store, const TranseConfig& cfg) {
  check(!store.triples.empty(), "train_transe: empty triple store");
  check(cfg.dim >= 2, "train_transe: dim must be >= 2");
  check(cfg.margin > 0.0 && cfg.learning_rate > 0.0, "train_transe: margin and lr must be positive");

  const std::size_t dim = cfg.dim;
  const auto n_e = static_cast<std::size_t>(store.n_entities);
  const auto n_r = static_cast<std::size_t>(store.n_relations);

  TranseTables tb;
  tb.dim = dim;
  tb.n_entities = n_e;
  tb.n_relations = n_r;
  tb.entity.resize(n_e * dim);
  tb.relation.resize(n_r * dim);

  Rng rng(cfg.seed);
  const double span = 6.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : tb.entity) v = rng.uniform(-span, span);
  for (double& v : tb.relation) v = rng.uniform(-span, span);
  l2_normalize_rows(tb.relation, n_r, dim);

  std::vector<std::size_t> order(store.triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> dpos(dim), dneg(dim);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
    for (std::size_t oi : order) {
      const auto& tr = store.triples[oi];
      const bool corrupt_head = rng.below(2) == 0;
      std::int32_t ch = tr.head, ct = tr.tail;
      for (int attempt = 0; attempt < 32; ++attempt) {
        const auto cand = static_cast<std::int32_t>(rng.below(n_e));
        if (corrupt_head) {
          if (cand != tr.head && !store.contains(cand, tr.relation, tr.tail)) {
            ch = cand;
            break;
          }
        } else {
          if (cand != tr.tail && !store.contains(tr.head, tr.relation, cand)) {
            ct = cand;
            break;
          }
        }
      }
      if (ch == tr.head && ct == tr.tail) continue;  // no usable corruption found

      double* eh = &tb.entity[static_cast<std::size_t>(tr.head) * dim];
      double* et = &tb.entity[static_cast<std::size_t>(tr.tail) * dim];
      double* rr = &tb.relation[static_cast<std::size_t>(tr.relation) * dim];
      double* ch_p = &tb.entity[static_cast<std::size_t>(ch) * dim];
      double* ct_p = &tb.entity[static_cast<std::size_t>(ct) * dim];

      const double d_pos = energy_raw(eh, rr, et, dim, dpos.data());
      const double d_neg = energy_raw(ch_p, rr, ct_p, dim, dneg.data());
      if (cfg.margin + d_pos - d_neg <= 0.0) continue;

      const double ip = d_pos > 1e-12 ? 1.0 / d_pos : 0.0;
      const double in = d_neg > 1e-12 ? 1.0 / d_neg : 0.0;
      const double lr = cfg.learning_rate;
      for (std::size_t j = 0; j < dim; ++j) {
        const double up = dpos[j] * ip;
        const double un = dneg[j] * in;
        eh[j] -= lr * up;
        et[j] += lr * up;
        rr[j] -= lr * (up - un);
        ch_p[j] += lr * un;
        ct_p[j] -= lr * un;
      }
    }
    l2_normalize_rows(tb.entity, n_e, dim);
  }
  return tb;
}

void save_transe(const TranseTables& tb, const std::string& path) {
  nn::NamedArrays na;
  na.put("transe.entity", {tb.n_entities, tb.dim}, tb.entity);
  na.put("transe.relation", {tb.n_relations, tb.dim}, tb.relation);
  save_named_arrays(na, path);
}

TranseTables load_transe(const std::string& path) {
  nn::NamedArrays na = nn::load_named_arrays(path);
  const auto& e = na.get("transe.entity");
  const auto& r = na.get("transe.relation");
  check(e.shape.size() == 2 && r.shape.size() == 2 && e.shape[1] == r.shape[1],
        "transe load: malformed tables in " + path);
  TranseTables tb;
  tb.n_entities = e.shape[0];
  tb.n_relations = r.shape[0];
  tb.dim = e.shape[1];
  tb.entity = e.data;
  tb.relation = r.data;
  return tb;
}

}  // namespace mmsum::corpus
