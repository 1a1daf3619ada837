#include "mmsum/metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "mmsum/nn/tensor.hpp"

using mmsum::nn::check;

namespace mmsum::metrics {

namespace {

double f1(double overlap, double n_hyp, double n_ref) {
  if (n_hyp <= 0.0 || n_ref <= 0.0) return 0.0;
  const double p = overlap / n_hyp;
  const double r = overlap / n_ref;
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

std::map<std::vector<Token>, std::size_t> ngram_counts(const std::vector<Token>& seq, int n) {
  std::map<std::vector<Token>, std::size_t> counts;
  if (seq.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    counts[std::vector<Token>(seq.begin() + static_cast<long>(i),
                              seq.begin() + static_cast<long>(i) + n)]++;
  return counts;
}

}  // namespace

double rouge_n(const std::vector<Token>& hypothesis, const std::vector<Token>& reference, int n) {
  check(n == 1 || n == 2, "rouge_n: n must be 1 or 2");
  const auto hyp = ngram_counts(hypothesis, n);
  const auto ref = ngram_counts(reference, n);
  double n_hyp = 0.0, n_ref = 0.0, overlap = 0.0;
  for (const auto& [g, c] : hyp) n_hyp += static_cast<double>(c);
  for (const auto& [g, c] : ref) n_ref += static_cast<double>(c);
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += static_cast<double>(std::min(c, it->second));
  }
  return f1(overlap, n_hyp, n_ref);
}

std::size_t lcs_length(const std::vector<Token>& a, const std::vector<Token>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const std::vector<Token>& hypothesis, const std::vector<Token>& reference) {
  const double lcs = static_cast<double>(lcs_length(hypothesis, reference));
  return f1(lcs, static_cast<double>(hypothesis.size()), static_cast<double>(reference.size()));
}

double image_precision(const std::vector<std::int32_t>& recommended,
                       const std::vector<std::int32_t>& reference) {
  check(!recommended.empty(), "image_precision: recommended set must be non-empty");
  const std::set<std::int32_t> rec(recommended.begin(), recommended.end());
  const std::set<std::int32_t> ref(reference.begin(), reference.end());
  std::size_t both = 0;
  for (std::int32_t r : rec) both += ref.count(r);
  return static_cast<double>(both) / static_cast<double>(rec.size());
}

std::string EvalReport::to_kv() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "rouge1_f=%.6f\nrouge2_f=%.6f\nrougeL_f=%.6f\nimage_precision=%.6f\n"
                "n_documents=%zu\n",
                rouge1_f, rouge2_f, rougeL_f, image_precision, n_documents);
  return buf;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["rouge1_f"] = rouge1_f;
  j["rouge2_f"] = rouge2_f;
  j["rougeL_f"] = rougeL_f;
  j["image_precision"] = image_precision;
  j["n_documents"] = n_documents;
  return j.dump(2);
}

}  // namespace mmsum::metrics
