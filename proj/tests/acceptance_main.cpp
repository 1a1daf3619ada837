// Acceptance suite: one line per criterion, nonzero exit if a gated
// criterion fails. Criterion 10 is reported but not gated.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mmsum/corpus/transe.hpp"
#include "mmsum/metrics/metrics.hpp"
#include "mmsum/nn/adam.hpp"
#include "mmsum/nn/gradcheck.hpp"
#include "mmsum/train/training.hpp"

using namespace mmsum;
using namespace mmsum::nn;
using model::ModelConfig;
using model::ModelParams;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

struct Criterion {
  int id;
  bool gated;
  bool passed;
  std::string detail;
};

std::vector<Criterion> g_results;

void record(int id, bool passed, const std::string& detail, bool gated = true) {
  g_results.push_back({id, gated, passed, detail});
  std::printf("[criterion %2d] %s  %s\n", id,
              gated ? (passed ? "PASS" : "FAIL") : (passed ? "REPORT(ok)" : "REPORT(off)"),
              detail.c_str());
  std::fflush(stdout);
}

fs::path work_dir(const char* leaf) {
  fs::path dir = fs::temp_directory_path() / "mmsum_acceptance" / leaf;
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

// --- shared fixtures ---------------------------------------------------

corpus::GenConfig tiny_gen() {
  corpus::GenConfig g;
  g.n_docs = 2;
  g.vocab_size = 48;
  g.n_entities = 5;
  g.n_relations = 2;
  g.d_q = 4;
  g.n_queries = 2;
  g.images_per_doc = 2;
  g.max_images = 4;
  g.max_context = 64;
  g.max_summary_len = 16;
  g.entity_dim = 4;
  g.seed = 101;
  return g;
}

ModelConfig tiny_model(const corpus::GenConfig& g) {
  ModelConfig c;
  c.vocab_size = g.vocab_size;
  c.d_model = 8;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.n_heads = 2;
  c.d_ffn = 16;
  c.d_entity = g.entity_dim;
  c.n_entities = g.n_entities;
  c.d_q = g.d_q;
  c.n_queries = g.n_queries;
  c.max_context = g.max_context;
  c.max_summary_len = g.max_summary_len;
  c.max_images = g.max_images;
  return c;
}

// One full pipeline run, mirroring the CLI `train` + `evaluate` flow.
struct PipelineResult {
  corpus::Corpus corpus;
  ModelParams model;
  metrics::EvalReport report;
  std::string checkpoint_path;
};

PipelineResult run_pipeline(const corpus::GenConfig& gen, const ModelConfig& base_cfg,
                            std::size_t transe_epochs, std::size_t stage1_epochs,
                            std::size_t stage2_epochs, double alpha, double tau,
                            std::uint64_t seed, model::GateMode gate, const char* leaf,
                            std::ostream* log = nullptr) {
  PipelineResult r{corpus::generate_corpus(gen), ModelParams(), {}, {}};

  corpus::TranseConfig tc;
  tc.dim = gen.entity_dim;
  tc.epochs = transe_epochs;
  tc.seed = 1;
  corpus::TranseTables tables = corpus::train_transe(r.corpus.triples, tc);

  ModelConfig cfg = base_cfg;
  cfg.gate_mode = gate;
  r.model = ModelParams::init(cfg, seed, &tables.entity);

  train::TrainConfig s1;
  s1.stage = train::Stage::modal_matching;
  s1.epochs = stage1_epochs;
  s1.seed = seed + 1;
  train::modal_matching_stage(r.model, r.corpus.docs, s1);

  train::TrainConfig s2;
  s2.stage = train::Stage::finetune;
  s2.epochs = stage2_epochs;
  s2.alpha = alpha;
  s2.tau = tau;
  s2.seed = seed + 2;
  s2.teacher_seed = gen.teacher_seed;
  const auto dir = work_dir(leaf);
  auto infos = train::finetune_stage(r.model, r.corpus.docs, r.corpus.docs, s2, dir.string(), log);
  r.checkpoint_path = infos.front().path;
  r.report = train::evaluate_model(r.model, r.corpus.docs, 5);
  return r;
}

// --- criterion 1: gradient suite ----------------------------------------

bool fd_matches(const std::function<Tensor(const Tensor&)>& build, const Tensor& x,
                double* worst) {
  Tensor loss = build(x);
  auto grads = nn::grad(loss, {x});
  Tensor numeric =
      nn::finite_diff_grad([&](const Tensor& p) { return build(p).item(); }, x, 1e-5);
  const double err = nn::max_rel_error(grads[0], numeric);
  *worst = std::max(*worst, err);
  return err < 1e-4;
}

bool per_op_gradients(double* worst) {
  nn::Rng rng(2024);
  auto rnd = [&](nn::Shape s, bool rg = true) {
    std::vector<double> d(nn::numel(s));
    for (double& v : d) v = rng.uniform(-2.0, 2.0);
    return Tensor::from(std::move(s), std::move(d), rg);
  };
  bool ok = true;
  Tensor m34 = rnd({3, 4}, false), m14 = rnd({1, 4}, false), m42 = rnd({4, 2}, false);
  Tensor m35 = rnd({3, 5}, false), m38 = rnd({3, 8}, false), m43 = rnd({4, 3}, false);

  ok &= fd_matches([&](const Tensor& p) { return sum_all(add(p, m14)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(sub(p, m34)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(mul(p, m34)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(scale(p, -1.3)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(matmul(p, m42)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(mul(transpose(p), m43)); }, rnd({3, 4}),
                   worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(mul(mean_rows(p), m14)); }, rnd({3, 4}),
                   worst);
  ok &= fd_matches([&](const Tensor& p) { return mean_all(mul(p, p)); }, rnd({3, 4}), worst);
  ok &= fd_matches(
      [&](const Tensor& p) {
        Tensor cat = concat_rows({p, m34});
        return sum_all(mul(slice_rows(cat, 2, 5), m34));
      },
      rnd({3, 4}), worst);
  ok &= fd_matches(
      [&](const Tensor& p) { return sum_all(mul(concat_cols({p, p}), concat_cols({m34, m34}))); },
      rnd({3, 4}), worst);
  ok &= fd_matches(
      [&](const Tensor& p) { return sum_all(mul(embedding(p, {3, 0, 3, 1}), m43)); },
      rnd({4, 3}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(relu(p)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(sigmoid(p)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(nn::tanh(p)); }, rnd({3, 4}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(nn::exp(scale(p, 0.5))); }, rnd({3, 4}),
                   worst);
  {
    Tensor pos = Tensor::from({2, 3}, {0.4, 1.2, 2.2, 0.9, 1.7, 0.6}, true);
    ok &= fd_matches([&](const Tensor& p) { return sum_all(nn::log(p)); }, pos, worst);
  }
  ok &= fd_matches([&](const Tensor& p) { return sum_all(mul(softmax(p), m35)); }, rnd({3, 5}),
                   worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(mul(log_softmax(p), m35)); },
                   rnd({3, 5}), worst);
  ok &= fd_matches([&](const Tensor& p) { return sum_all(mul(layer_norm(p, 1e-10), m38)); },
                   rnd({3, 8}), worst);
  ok &= fd_matches([&](const Tensor& p) { return cross_entropy_sum(p, {1, 4, 0}); }, rnd({3, 5}),
                   worst);
  return ok;
}

bool composite_gradients(double* worst) {
  corpus::GenConfig gen = tiny_gen();
  corpus::Corpus c = corpus::generate_corpus(gen);
  ModelParams model = ModelParams::init(tiny_model(gen), 55);
  auto teacher = model::make_teacher("toy", gen.vocab_size, gen.d_q, gen.teacher_seed);
  const std::vector<std::size_t> batch{0, 1};

  struct LossCase {
    const char* name;
    std::function<Tensor()> build;
  };
  const double alpha = 1.0, tau = 1.0;
  std::vector<LossCase> cases{
      {"L_sum",
       [&]() {
         return train::stage2_batch_losses(model, c.docs, batch, *teacher, alpha, tau)
             .summarization;
       }},
      {"L_is",
       [&]() {
         return train::stage2_batch_losses(model, c.docs, batch, *teacher, alpha, tau)
             .distillation;
       }},
      {"total", [&]() {
         return train::stage2_batch_losses(model, c.docs, batch, *teacher, alpha, tau).total;
       }}};

  bool ok = true;
  for (const auto& lc : cases) {
    Tensor loss = lc.build();
    auto autodiff = nn::grad(loss, model.tensors());
    for (std::size_t k = 0; k < model.entries.size(); ++k) {
      Tensor& param = model.entries[k].second;
      auto eval_at = [&](const Tensor& probe) {
        nn::NoGradGuard ng;
        std::vector<double> saved = param.data();
        param.mutable_data() = probe.data();
        const double v = lc.build().item();
        param.mutable_data() = saved;
        return v;
      };
      // Floor 1e-5: with losses of magnitude ~30 the finite-difference
      // quotient carries ~1e-10 of rounding noise, so coordinates below
      // the floor are held to the absolute tolerance 1e-9 instead.
      Tensor numeric = nn::finite_diff_grad(eval_at, param, 1e-5);
      const double err = nn::max_rel_error(autodiff[k], numeric, 1e-5);
      *worst = std::max(*worst, err);
      if (err >= 1e-4) {
        std::fprintf(stderr, "  gradient mismatch: loss=%s param=%s rel_err=%.3g\n", lc.name,
                     model.entries[k].first.c_str(), err);
        ok = false;
      }
    }
  }
  return ok;
}

void criterion_1() {
  const double t0 = now_seconds();
  double worst = 0.0;
  bool ok = per_op_gradients(&worst);
  ok = composite_gradients(&worst) && ok;
  const double elapsed = now_seconds() - t0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gradient suite: max rel err %.3g (< 1e-4), runtime %.1fs (< 120s)", worst,
                elapsed);
  record(1, ok && elapsed < 120.0, buf);
}

// --- criterion 2: gate / fusion ------------------------------------------

void criterion_2() {
  corpus::GenConfig gen = tiny_gen();
  ModelParams model = ModelParams::init(tiny_model(gen), 7);
  nn::Rng rng(31);
  auto rnd = [&](std::size_t r, std::size_t c) {
    std::vector<double> d(r * c);
    for (double& v : d) v = rng.uniform(-2.0, 2.0);
    return Tensor::from({r, c}, d);
  };

  bool in_range = true;
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor t = rnd(1 + rng.below(8), model.cfg.d_model);
    Tensor e = rnd(1 + rng.below(4), model.cfg.d_model);
    const double w = model::gate_weight(model, t, e).item();
    in_range = in_range && w > 0.0 && w < 1.0;
  }

  Tensor a = rnd(6, 8), b = rnd(6, 8);
  const bool clamp_one = model::fuse_images(a, b, Tensor::from({1, 1}, {1.0})).data() == a.data();
  const bool clamp_zero = model::fuse_images(a, b, Tensor::from({1, 1}, {0.0})).data() == b.data();

  // elementwise d(fused)/dw == a - b
  bool deriv_ok = true;
  double worst = 0.0;
  Tensor w = Tensor::from({1, 1}, {0.42}, true);
  Tensor fused = model::fuse_images(a, b, w);
  for (std::size_t rr = 0; rr < 6 && deriv_ok; ++rr)
    for (std::size_t cc = 0; cc < 8; ++cc) {
      Tensor element = slice(fused, rr, rr + 1, cc, cc + 1);
      auto g = nn::grad(sum_all(element), {w});
      const double expect = a.at(rr, cc) - b.at(rr, cc);
      const double err = std::abs(g[0].item() - expect);
      worst = std::max(worst, err);
      if (err > 1e-8) deriv_ok = false;
    }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gate in (0,1) on 1000 inputs: %s; clamp bitwise: %s/%s; |dF/dw - (a-b)| max %.2g",
                in_range ? "yes" : "NO", clamp_one ? "yes" : "NO", clamp_zero ? "yes" : "NO",
                worst);
  record(2, in_range && clamp_one && clamp_zero && deriv_ok, buf);
}

// --- criterion 3: distillation loss ---------------------------------------

void criterion_3() {
  nn::Rng rng(47);
  bool zero_ok = true;
  for (double tau : {0.5, 1.0, 2.0}) {
    std::vector<double> s(4);
    for (double& v : s) v = rng.uniform(-2, 2);
    zero_ok = zero_ok && std::abs(model::kd_loss(Tensor::from({1, 4}, s), s, tau).item()) <= 1e-12;
  }

  bool nonneg = true, shift_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + rng.below(6);
    std::vector<double> g(m), l(m);
    for (double& v : g) v = rng.uniform(-3, 3);
    for (double& v : l) v = rng.uniform(-3, 3);
    const double loss = model::kd_loss(Tensor::from({1, m}, g), l, 1.0).item();
    nonneg = nonneg && loss >= -1e-15;

    const double c = rng.uniform(-4, 4);
    std::vector<double> shifted = g;
    for (double& v : shifted) v += c;
    Tensor p0 = softmax(scale(Tensor::from({1, m}, g), 1.0));
    Tensor p1 = softmax(scale(Tensor::from({1, m}, shifted), 1.0));
    for (std::size_t i = 0; i < m; ++i)
      shift_ok = shift_ok && std::abs(p0.data()[i] - p1.data()[i]) <= 1e-12;
  }

  const double analytic =
      model::kd_loss(Tensor::from({1, 2}, {0.0, 0.0}), {std::log(3.0), 0.0}, 1.0).item();
  const bool analytic_ok = std::abs(analytic - 0.5 * std::log(4.0 / 3.0)) <= 1e-9;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "KL(g,g)=0: %s; KL>=0 x1000: %s; shift invariance: %s; analytic %.9f",
                zero_ok ? "yes" : "NO", nonneg ? "yes" : "NO", shift_ok ? "yes" : "NO", analytic);
  record(3, zero_ok && nonneg && shift_ok && analytic_ok, buf);
}

// --- criterion 4: weight sharing + stage freeze ----------------------------

void criterion_4() {
  corpus::GenConfig gen = tiny_gen();
  gen.n_docs = 6;
  corpus::Corpus c = corpus::generate_corpus(gen);
  ModelParams model = ModelParams::init(tiny_model(gen), 9);

  // dual application of the shared encoder on identical inputs
  Tensor text = model::embed_text(model, c.docs[0].sentences);
  Tensor vis = model::embed_images(model, c.docs[0].images);
  auto [a_lead, a_vis] = model::encode(model, text, vis);
  auto [b_lead, b_vis] = model::encode(model, text, vis);
  const bool share_ok = a_lead.data() == b_lead.data() && a_vis.data() == b_vis.data();

  std::vector<std::pair<std::string, std::vector<double>>> before;
  for (const auto& [name, t] : model.entries) before.emplace_back(name, t.data());
  train::TrainConfig s1;
  s1.stage = train::Stage::modal_matching;
  s1.epochs = 2;
  s1.seed = 17;
  train::modal_matching_stage(model, c.docs, s1);

  bool frozen_ok = true, trained_ok = false;
  for (const auto& [name, old] : before) {
    const auto& now = model.at(name).data();
    if (name == "enc.W_v" || name == "enc.v_cls") {
      if (now != old) trained_ok = true;
    } else if (now != old) {
      frozen_ok = false;
      std::fprintf(stderr, "  parameter %s changed during modal matching\n", name.c_str());
    }
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf), "dual-pass bitwise equal: %s; frozen set bitwise intact: %s",
                share_ok ? "yes" : "NO", frozen_ok && trained_ok ? "yes" : "NO");
  record(4, share_ok && frozen_ok && trained_ok, buf);
}

// --- criterion 5 + 10: overfit run and ablations ---------------------------

corpus::GenConfig overfit_gen() {
  corpus::GenConfig g;  // defaults: 20 entities, d_q 32, 4 queries per image
  g.n_docs = 16;
  g.vocab_size = 200;
  g.images_per_doc = 3;
  g.seed = 7;
  return g;
}

ModelConfig overfit_model(const corpus::GenConfig& g) {
  ModelConfig c;  // desk-scale defaults: d 64, 2+2 layers, 4 heads, ffn 256
  c.vocab_size = g.vocab_size;
  c.n_entities = g.n_entities;
  c.d_entity = g.entity_dim;
  c.d_q = g.d_q;
  c.n_queries = g.n_queries;
  c.max_context = g.max_context;
  c.max_summary_len = g.max_summary_len;
  c.max_images = g.max_images;
  return c;
}

metrics::EvalReport g_full_report;

void criterion_5() {
  const double t0 = now_seconds();
  corpus::GenConfig gen = overfit_gen();
  std::ostringstream log;
  PipelineResult r = run_pipeline(gen, overfit_model(gen), 200, 50, 200, 1.0, 1.0,
                                  /*seed=*/1, model::GateMode::learned, "overfit_full", &log);
  g_full_report = r.report;
  const double elapsed = now_seconds() - t0;

  // Trend check: 10-step window means of the total loss decrease within a
  // 10% noise tolerance, and the last window sits far below the first.
  std::vector<double> totals;
  std::istringstream lines(log.str());
  std::string line;
  while (std::getline(lines, line)) {
    const auto at = line.find("total=");
    if (at != std::string::npos && line.rfind("stage=2", 0) == 0)
      totals.push_back(std::stod(line.substr(at + 6)));
  }
  std::vector<double> windows;
  for (std::size_t i = 0; i < totals.size(); i += 10) {
    double m = 0;
    const std::size_t hi = std::min(totals.size(), i + 10);
    for (std::size_t j = i; j < hi; ++j) m += totals[j];
    windows.push_back(m / static_cast<double>(hi - i));
  }
  bool trend_ok = windows.size() >= 2 && windows.back() < 0.05 * windows.front();
  for (std::size_t i = 1; i < windows.size(); ++i)
    if (windows[i] > 1.10 * windows[i - 1]) trend_ok = false;

  const bool ok = r.report.rouge1_f > 0.90 && r.report.rougeL_f > 0.85 &&
                  r.report.image_precision >= 0.75 && trend_ok && elapsed < 900.0;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "overfit run (seed 7): R1=%.3f (>0.90) R2=%.3f RL=%.3f (>0.85) IP=%.3f (>=0.75), "
                "loss windows decreasing: %s, runtime %.0fs (<900s)",
                r.report.rouge1_f, r.report.rouge2_f, r.report.rougeL_f,
                r.report.image_precision, trend_ok ? "yes" : "NO", elapsed);
  record(5, ok, buf);
}

void criterion_10() {
  corpus::GenConfig gen = overfit_gen();
  if (g_full_report.n_documents == 0) {  // criterion 5 was skipped this run
    PipelineResult full = run_pipeline(gen, overfit_model(gen), 200, 50, 200, 1.0, 1.0, 1,
                                       model::GateMode::learned, "overfit_full");
    g_full_report = full.report;
  }
  struct Variant {
    const char* name;
    double alpha;
    model::GateMode gate;
    const char* leaf;
  };
  const Variant variants[] = {
      {"w=1", 1.0, model::GateMode::fixed_one, "overfit_w1"},
      {"w=0", 1.0, model::GateMode::fixed_zero, "overfit_w0"},
      {"alpha=0", 0.0, model::GateMode::learned, "overfit_a0"},
  };
  std::string detail = "full R1=" + std::to_string(g_full_report.rouge1_f).substr(0, 5);
  bool ordering = true;
  for (const auto& v : variants) {
    PipelineResult r =
        run_pipeline(gen, overfit_model(gen), 200, 50, 200, v.alpha, 1.0, 1.0, v.gate, v.leaf);
    detail += std::string("; ") + v.name + " R1=" + std::to_string(r.report.rouge1_f).substr(0, 5) +
              " IP=" + std::to_string(r.report.image_precision).substr(0, 5);
    if (g_full_report.rouge1_f < r.report.rouge1_f - 0.02) ordering = false;
  }
  detail += ordering ? "; full >= variants - 0.02" : "; ORDERING VIOLATED";
  record(10, ordering, detail, /*gated=*/false);
}

// --- criterion 6: metrics oracle --------------------------------------------

std::size_t brute_force_lcs(const std::vector<std::int32_t>& a,
                            const std::vector<std::int32_t>& b) {
  const std::size_t n = a.size();
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    const auto len = static_cast<std::size_t>(__builtin_popcount(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size())
        ok = false;
      else
        ++j;
    }
    if (ok) best = len;
  }
  return best;
}

void criterion_6() {
  std::vector<std::vector<std::int32_t>> seqs{{}};
  std::vector<std::vector<std::int32_t>> frontier{{}};
  for (int l = 1; l <= 7; ++l) {
    std::vector<std::vector<std::int32_t>> next;
    for (const auto& s : frontier)
      for (std::int32_t t = 0; t < 3; ++t) {
        auto e = s;
        e.push_back(t);
        next.push_back(e);
      }
    seqs.insert(seqs.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  std::size_t mismatches = 0;
  for (const auto& a : seqs)
    for (const auto& b : seqs)
      if (metrics::lcs_length(a, b) != brute_force_lcs(a, b)) ++mismatches;

  const bool hand_ok = metrics::rouge_n({1, 3, 4}, {1, 2, 3}, 1) == 2.0 / 3.0 &&
                       metrics::rouge_n({1, 2, 4}, {1, 2, 3}, 2) == 0.5 &&
                       metrics::rouge_l({1, 3, 2, 4}, {1, 2, 3, 4}) == 0.75 &&
                       metrics::image_precision({2}, {1, 2, 3}) == 1.0 &&
                       metrics::image_precision({5}, {1}) == 0.0 &&
                       metrics::image_precision({1, 2}, {2}) == 0.5;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "LCS vs brute force on %zu^2 pairs (len<=7, 3 symbols): %zu mismatches; hand "
                "examples exact: %s",
                seqs.size(), mismatches, hand_ok ? "yes" : "NO");
  record(6, mismatches == 0 && hand_ok, buf);
}

// --- criterion 7: determinism ------------------------------------------------

void criterion_7() {
  auto run = [&](const char* leaf) {
    corpus::GenConfig gen = tiny_gen();
    gen.n_docs = 6;
    gen.seed = 11;
    PipelineResult r = run_pipeline(gen, tiny_model(gen), 30, 5, 15, 1.0, 1.0, 3,
                                    model::GateMode::learned, leaf);
    return std::make_pair(file_bytes(r.checkpoint_path), r.report.to_kv() + r.report.to_json());
  };
  const auto a = run("det_a");
  const auto b = run("det_b");
  const bool ok = a.first == b.first && a.second == b.second && !a.first.empty();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "two full pipeline runs: checkpoints bit-identical: %s; reports identical: %s",
                a.first == b.first ? "yes" : "NO", a.second == b.second ? "yes" : "NO");
  record(7, ok, buf);
}

// --- criterion 8: beam degeneration ------------------------------------------

void criterion_8() {
  ModelConfig c;
  c.vocab_size = 24;
  c.d_model = 8;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.n_heads = 2;
  c.d_ffn = 16;
  c.d_entity = 4;
  c.n_entities = 4;
  c.d_q = 4;
  c.n_queries = 2;
  c.max_context = 32;
  c.max_summary_len = 8;
  nn::Rng rng(71);
  std::size_t agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelParams m = ModelParams::init(c, 5000 + static_cast<std::uint64_t>(trial));
    std::vector<double> mem(5 * c.d_model);
    for (double& v : mem) v = rng.uniform(-1.5, 1.5);
    Tensor memory = Tensor::from({5, c.d_model}, mem);
    if (model::beam_search(m, memory, 1, c.max_summary_len) ==
        model::greedy_decode(m, memory, c.max_summary_len))
      ++agree;
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "beam_size=1 equals greedy on %zu/100 random models", agree);
  record(8, agree == 100, buf);
}

// --- criterion 9: translation-embedding sanity --------------------------------

void criterion_9() {
  corpus::TripleStore s;
  s.n_entities = 10;
  s.n_relations = 1;
  for (std::int32_t i = 0; i < 10; ++i) s.add(i, 0, (i + 1) % 10);
  corpus::TranseConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 200;
  cfg.seed = 11;
  corpus::TranseTables t = corpus::train_transe(s, cfg);

  double true_mean = 0.0;
  for (const auto& tr : s.triples) true_mean += corpus::transe_energy(t, tr.head, tr.relation, tr.tail);
  true_mean /= static_cast<double>(s.triples.size());

  nn::Rng rng(77);
  double corrupt_mean = 0.0;
  std::size_t n = 0;
  while (n < 100) {
    const auto h = static_cast<std::int32_t>(rng.below(10));
    const auto t2 = static_cast<std::int32_t>(rng.below(10));
    if (s.contains(h, 0, t2)) continue;
    corrupt_mean += corpus::transe_energy(t, h, 0, t2);
    ++n;
  }
  corrupt_mean /= 100.0;
  char buf[140];
  std::snprintf(buf, sizeof(buf),
                "ring KG: mean true energy %.3f < mean corrupted energy %.3f over 100 samples",
                true_mean, corrupt_mean);
  record(9, true_mean < corrupt_mean, buf);
}

}  // namespace

int main(int argc, char** argv) {
  now_seconds();  // pin the clock origin
  // Optional arguments select individual criteria, e.g. `acceptance 1 5`.
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  auto selected = [&](int id) {
    return wanted.empty() || std::find(wanted.begin(), wanted.end(), id) != wanted.end();
  };

  try {
    if (selected(1)) criterion_1();
    if (selected(2)) criterion_2();
    if (selected(3)) criterion_3();
    if (selected(4)) criterion_4();
    if (selected(5)) criterion_5();
    if (selected(6)) criterion_6();
    if (selected(7)) criterion_7();
    if (selected(8)) criterion_8();
    if (selected(9)) criterion_9();
    if (selected(10)) criterion_10();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
    return 1;
  }

  std::size_t failed = 0, gated = 0;
  for (const auto& r : g_results) {
    if (!r.gated) continue;
    ++gated;
    if (!r.passed) ++failed;
  }
  std::printf("acceptance: %zu/%zu gated criteria passed (total runtime %.0fs)\n", gated - failed,
              gated, now_seconds());
  return failed == 0 ? 0 : 1;
}
