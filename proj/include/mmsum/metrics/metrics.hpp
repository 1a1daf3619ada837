#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mmsum::metrics {

using Token = std::int32_t;

// Clipped n-gram overlap F1 (n in {1,2}); empty inputs score 0.
double rouge_n(const std::vector<Token>& hypothesis, const std::vector<Token>& reference, int n);

// Longest-common-subsequence F1 over whole sequences.
double rouge_l(const std::vector<Token>& hypothesis, const std::vector<Token>& reference);

std::size_t lcs_length(const std::vector<Token>& a, const std::vector<Token>& b);

// |reference ∩ recommended| / |recommended|; recommended must be non-empty.
double image_precision(const std::vector<std::int32_t>& recommended,
                       const std::vector<std::int32_t>& reference);

struct EvalReport {
  double rouge1_f = 0.0;
  double rouge2_f = 0.0;
  double rougeL_f = 0.0;
  double image_precision = 0.0;
  std::size_t n_documents = 0;

  std::string to_kv() const;    // line-oriented key=value block
  std::string to_json() const;
};

}  // namespace mmsum::metrics
