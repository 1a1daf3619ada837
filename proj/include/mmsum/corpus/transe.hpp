#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmsum/corpus/corpus.hpp"

namespace mmsum::corpus {

struct TranseConfig {
  std::size_t dim = 32;
  std::size_t epochs = 200;
  double margin = 1.0;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
};

struct TranseTables {
  std::size_t dim = 0;
  std::size_t n_entities = 0;
  std::size_t n_relations = 0;
  std::vector<double> entity;    // [n_entities, dim]
  std::vector<double> relation;  // [n_relations, dim]
};

// Translation-based embedding trainer with L2 energy |h + r - t| and
// margin ranking loss over uniformly corrupted heads/tails. Entity rows
// are L2-normalized after each epoch; zero epochs returns the seeded
// initialization untouched.
TranseTables train_transe(const TripleStore& store, const TranseConfig& cfg);

double transe_energy(const TranseTables& tables, std::int32_t h, std::int32_t r, std::int32_t t);

void save_transe(const TranseTables& tables, const std::string& path);
TranseTables load_transe(const std::string& path);

}  // namespace mmsum::corpus
