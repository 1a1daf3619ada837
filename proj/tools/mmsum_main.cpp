// Command-line entry points for the multimodal summarization pipeline:
//   gen-data     synthesize a corpus (JSONL + vocab/lexicon/triples + meta)
//   train-transe train knowledge-graph entity embeddings from triples
//   train        run modal matching then fine-tuning, with checkpoints
//   evaluate     score checkpoints on a split (text metrics + image precision)
//   summarize    emit one document's multimodal summary
//
// Exit codes: 0 success, 1 usage error, 2 data/contract error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "mmsum/corpus/corpus.hpp"
#include "mmsum/corpus/transe.hpp"
#include "mmsum/metrics/metrics.hpp"
#include "mmsum/train/training.hpp"

using namespace mmsum;
namespace fs = std::filesystem;

namespace {

// Config-file overrides: `key = value` lines (# comments allowed), keys
// matching the long flag names. Values from the file take precedence
// over anything given on the command line.
struct KvOverride {
  std::map<std::string, std::function<void(const std::string&)>> setters;

  void bind(const std::string& key, std::size_t* p) {
    setters[key] = [p](const std::string& v) { *p = std::stoull(v); };
  }
  void bind(const std::string& key, double* p) {
    setters[key] = [p](const std::string& v) { *p = std::stod(v); };
  }
  void bind(const std::string& key, std::string* p) {
    setters[key] = [p](const std::string& v) { *p = v; };
  }

  void apply(const std::string& path) const {
    std::ifstream in(path);
    nn::check(in.good(), "cannot open config file " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) continue;
      auto it = setters.find(key);
      nn::check(it != setters.end(),
                path + " line " + std::to_string(line_no) + ": unknown config key '" + key + "'");
      it->second(value);
    }
  }
};

void print_config(const std::map<std::string, std::string>& kv) {
  std::cerr << "resolved config:\n";
  for (const auto& [k, v] : kv) std::cerr << "  " << k << " = " << v << "\n";
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct DataDir {
  corpus::GenConfig meta;
  corpus::Vocab vocab;
  corpus::EntityLexicon lexicon;
  std::vector<corpus::Document> docs;
};

DataDir load_data_dir(const std::string& dir) {
  DataDir d;
  d.meta = corpus::load_meta_json((fs::path(dir) / "meta.json").string());
  d.vocab = corpus::load_vocab_tsv((fs::path(dir) / "vocab.tsv").string());
  d.lexicon = corpus::load_lexicon_tsv((fs::path(dir) / "lexicon.tsv").string(), d.vocab,
                                       d.meta.entity_dim);
  d.docs = corpus::load_corpus_jsonl((fs::path(dir) / "corpus.jsonl").string(), d.meta.max_context,
                                   &d.lexicon);
  return d;
}

int cmd_gen_data(const std::string& out_dir, const corpus::GenConfig& cfg, bool sidefile) {
  print_config({{"command", "gen-data"},
                {"out", out_dir},
                {"n_docs", std::to_string(cfg.n_docs)},
                {"vocab_size", std::to_string(cfg.vocab_size)},
                {"n_entities", std::to_string(cfg.n_entities)},
                {"n_relations", std::to_string(cfg.n_relations)},
                {"d_q", std::to_string(cfg.d_q)},
                {"n_queries", std::to_string(cfg.n_queries)},
                {"images_per_doc", std::to_string(cfg.images_per_doc)},
                {"max_images", std::to_string(cfg.max_images)},
                {"topics_per_doc", std::to_string(cfg.topics_per_doc)},
                {"max_context", std::to_string(cfg.max_context)},
                {"max_summary_len", std::to_string(cfg.max_summary_len)},
                {"entity_dim", std::to_string(cfg.entity_dim)},
                {"feature_noise", fmt(cfg.feature_noise)},
                {"features_file", sidefile ? "true" : "false"},
                {"seed", std::to_string(cfg.seed)},
                {"teacher_seed", std::to_string(cfg.teacher_seed)}});
  fs::create_directories(out_dir);
  corpus::Corpus c = corpus::generate_corpus(cfg);
  const fs::path dir(out_dir);
  if (sidefile)
    corpus::save_corpus_jsonl_sidefile(c.docs, (dir / "corpus.jsonl").string(), "features.mmck");
  else
    corpus::save_corpus_jsonl(c.docs, (dir / "corpus.jsonl").string());
  corpus::save_vocab_tsv(c.vocab, (dir / "vocab.tsv").string());
  corpus::save_lexicon_tsv(c.lexicon, (dir / "lexicon.tsv").string());
  corpus::save_triples_tsv(c.triples, (dir / "triples.tsv").string());
  corpus::save_meta_json(cfg, (dir / "meta.json").string());
  std::cout << "wrote " << c.docs.size() << " documents to " << (dir / "corpus.jsonl").string()
            << "\n";
  return 0;
}

int cmd_train_transe(const std::string& triples_path, const std::string& out_path,
                     const corpus::TranseConfig& cfg) {
  print_config({{"command", "train-transe"},
                {"triples", triples_path},
                {"out", out_path},
                {"dim", std::to_string(cfg.dim)},
                {"epochs", std::to_string(cfg.epochs)},
                {"margin", fmt(cfg.margin)},
                {"lr", fmt(cfg.learning_rate)},
                {"seed", std::to_string(cfg.seed)}});
  corpus::TripleStore store = corpus::load_triples_tsv(triples_path);
  corpus::TranseTables tables = corpus::train_transe(store, cfg);
  corpus::save_transe(tables, out_path);
  std::cout << "wrote entity table [" << tables.n_entities << " x " << tables.dim << "] to "
            << out_path << "\n";
  return 0;
}

struct TrainCli {
  std::string data_dir, transe_path, out_dir, val_path, config_path;
  std::string gate_mode = "learned";
  std::string teacher = "toy";
  train::TrainConfig tc;
  std::size_t stage1_epochs = 50;
  std::size_t stage2_epochs = 200;
  std::size_t d_model = 64, enc_layers = 2, dec_layers = 2, heads = 4, ffn = 256;
  std::uint64_t seed = 1;
  bool teacher_seed_set = false;
};

int cmd_train(TrainCli& cli) {
  DataDir data = load_data_dir(cli.data_dir);
  if (!cli.teacher_seed_set) cli.tc.teacher_seed = data.meta.teacher_seed;

  corpus::TranseTables tables = corpus::load_transe(cli.transe_path);
  nn::check(tables.n_entities == data.lexicon.size(),
            "entity table rows (" + std::to_string(tables.n_entities) +
                ") do not match the lexicon (" + std::to_string(data.lexicon.size()) + ")");

  model::ModelConfig mc;
  mc.vocab_size = data.vocab.size();
  mc.d_model = cli.d_model;
  mc.n_enc_layers = cli.enc_layers;
  mc.n_dec_layers = cli.dec_layers;
  mc.n_heads = cli.heads;
  mc.d_ffn = cli.ffn;
  mc.d_entity = tables.dim;
  mc.n_entities = tables.n_entities;
  mc.d_q = data.meta.d_q;
  mc.n_queries = data.meta.n_queries;
  mc.max_context = data.meta.max_context;
  mc.max_summary_len = data.meta.max_summary_len;
  mc.max_images = data.meta.max_images;
  mc.gate_mode = model::gate_mode_from(cli.gate_mode);
  mc.validate();

  print_config({{"command", "train"},
                {"data", cli.data_dir},
                {"transe", cli.transe_path},
                {"out", cli.out_dir},
                {"val", cli.val_path.empty() ? "(training split)" : cli.val_path},
                {"alpha", fmt(cli.tc.alpha)},
                {"tau", fmt(cli.tc.tau)},
                {"lr", fmt(cli.tc.learning_rate)},
                {"batch_size", std::to_string(cli.tc.batch_size)},
                {"stage1_epochs", std::to_string(cli.stage1_epochs)},
                {"stage2_epochs", std::to_string(cli.stage2_epochs)},
                {"n_subsets", std::to_string(cli.tc.n_subsets)},
                {"top_k", std::to_string(cli.tc.top_k_checkpoints)},
                {"gate_mode", cli.gate_mode},
                {"teacher", cli.teacher},
                {"teacher_seed", std::to_string(cli.tc.teacher_seed)},
                {"model", mc.fingerprint()},
                {"seed", std::to_string(cli.seed)}});

  std::vector<corpus::Document> val_docs;
  if (!cli.val_path.empty())
    val_docs = corpus::load_corpus_jsonl(cli.val_path, data.meta.max_context, &data.lexicon);

  fs::create_directories(cli.out_dir);
  std::ofstream log((fs::path(cli.out_dir) / "train.log").string());
  nn::check(log.good(), "cannot open train.log in " + cli.out_dir);

  model::ModelParams m = model::ModelParams::init(mc, cli.seed, &tables.entity);

  train::TrainConfig s1 = cli.tc;
  s1.stage = train::Stage::modal_matching;
  s1.epochs = cli.stage1_epochs;
  s1.seed = cli.seed + 1;
  s1.teacher = cli.teacher;
  train::modal_matching_stage(m, data.docs, s1, &log);

  train::TrainConfig s2 = cli.tc;
  s2.stage = train::Stage::finetune;
  s2.epochs = cli.stage2_epochs;
  s2.seed = cli.seed + 2;
  s2.teacher = cli.teacher;
  auto infos = train::finetune_stage(m, data.docs, val_docs, s2, cli.out_dir, &log);

  const std::string final_path = (fs::path(cli.out_dir) / "final.mmck").string();
  model::save_checkpoint(m, final_path);
  std::cout << "final checkpoint: " << final_path << "\n";
  for (const auto& info : infos)
    std::cout << "kept checkpoint: " << info.path << " (val_loss=" << info.val_loss
              << ", subset=" << info.subset << ")\n";
  return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::vector<std::string>& checkpoints,
                 std::size_t beam, const std::string& json_out) {
  print_config({{"command", "evaluate"},
                {"data", data_dir},
                {"checkpoints", std::to_string(checkpoints.size())},
                {"beam_size", std::to_string(beam)},
                {"json_out", json_out.empty() ? "(none)" : json_out}});
  DataDir data = load_data_dir(data_dir);
  nn::check(!data.docs.empty(), "evaluate: the split has no documents");

  // Mean of the per-checkpoint reports (metrics averaged, not weights).
  metrics::EvalReport mean;
  mean.n_documents = data.docs.size();
  for (const auto& path : checkpoints) {
    model::ModelParams m = model::load_checkpoint(path);
    metrics::EvalReport r = train::evaluate_model(m, data.docs, beam);
    std::cerr << "checkpoint " << path << ":\n" << r.to_kv();
    mean.rouge1_f += r.rouge1_f / static_cast<double>(checkpoints.size());
    mean.rouge2_f += r.rouge2_f / static_cast<double>(checkpoints.size());
    mean.rougeL_f += r.rougeL_f / static_cast<double>(checkpoints.size());
    mean.image_precision += r.image_precision / static_cast<double>(checkpoints.size());
  }
  std::cout << mean.to_kv();
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    nn::check(out.good(), "cannot open " + json_out + " for writing");
    out << mean.to_json() << "\n";
  }
  return 0;
}

int cmd_summarize(const std::string& data_dir, const std::string& checkpoint,
                  const std::string& doc_id, std::size_t beam) {
  print_config({{"command", "summarize"},
                {"data", data_dir},
                {"checkpoint", checkpoint},
                {"doc_id", doc_id},
                {"beam_size", std::to_string(beam)}});
  DataDir data = load_data_dir(data_dir);
  const corpus::Document* doc = nullptr;
  for (const auto& d : data.docs)
    if (d.id == doc_id) doc = &d;
  nn::check(doc != nullptr, "no document with id '" + doc_id + "' in " + data_dir);

  model::ModelParams m = model::load_checkpoint(checkpoint);
  train::DocOutputs fwd = train::document_forward(m, *doc);
  const auto tokens = model::beam_search(m, fwd.memory, beam, m.cfg.max_summary_len);
  std::cout << "doc_id: " << doc->id << "\n";
  std::cout << "summary: " << data.vocab.text(tokens) << "\n";
  if (!fwd.image_scores.empty())
    std::cout << "image: " << model::select_image(fwd.image_scores) << "\n";
  else
    std::cout << "image: (document has no images)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entity-aware multimodal summarization at desk scale"};
  app.require_subcommand(1);

  // gen-data
  corpus::GenConfig gen;
  std::string gen_out;
  bool gen_sidefile = false;
  std::string gen_config_file;
  auto* gd = app.add_subcommand("gen-data", "generate a synthetic multimodal corpus");
  gd->add_option("--out", gen_out, "output directory")->required();
  gd->add_option("--n-docs", gen.n_docs, "number of documents");
  gd->add_option("--vocab-size", gen.vocab_size, "vocabulary size (including reserved ids)");
  gd->add_option("--n-entities", gen.n_entities, "lexicon size");
  gd->add_option("--n-relations", gen.n_relations, "relation count");
  gd->add_option("--d-q", gen.d_q, "image feature width");
  gd->add_option("--n-queries", gen.n_queries, "feature rows per image");
  gd->add_option("--images-per-doc", gen.images_per_doc, "images per document");
  gd->add_option("--max-images", gen.max_images, "image cap per document");
  gd->add_option("--topics-per-doc", gen.topics_per_doc, "summary entities per document");
  gd->add_option("--max-context", gen.max_context, "encoder sequence budget");
  gd->add_option("--max-summary-len", gen.max_summary_len, "summary token budget");
  gd->add_option("--entity-dim", gen.entity_dim, "entity embedding width");
  gd->add_option("--feature-noise", gen.feature_noise, "relative feature noise");
  gd->add_option("--seed", gen.seed, "corpus seed");
  gd->add_option("--teacher-seed", gen.teacher_seed, "teacher table seed");
  gd->add_flag("--features-file", gen_sidefile, "store image features in a side file");
  gd->add_option("--config", gen_config_file, "key=value file overriding flags");

  // train-transe
  corpus::TranseConfig transe;
  std::string transe_triples, transe_out, transe_config_file;
  auto* tt = app.add_subcommand("train-transe", "train entity embeddings from triples");
  tt->add_option("--triples", transe_triples, "triples TSV")->required();
  tt->add_option("--out", transe_out, "output table file")->required();
  tt->add_option("--dim", transe.dim, "embedding width");
  tt->add_option("--epochs", transe.epochs, "training epochs");
  tt->add_option("--margin", transe.margin, "ranking margin");
  tt->add_option("--lr", transe.learning_rate, "learning rate");
  tt->add_option("--seed", transe.seed, "seed");
  tt->add_option("--config", transe_config_file, "key=value file overriding flags");

  // train
  TrainCli tr;
  auto* trc = app.add_subcommand("train", "modal matching then fine-tuning");
  trc->add_option("--data", tr.data_dir, "corpus directory from gen-data")->required();
  trc->add_option("--transe", tr.transe_path, "entity embedding table")->required();
  trc->add_option("--out", tr.out_dir, "checkpoint/log directory")->required();
  trc->add_option("--val", tr.val_path, "validation corpus JSONL (default: training split)");
  trc->add_option("--alpha", tr.tc.alpha, "image-selection loss weight");
  trc->add_option("--tau", tr.tc.tau, "distillation temperature");
  trc->add_option("--lr", tr.tc.learning_rate, "learning rate");
  trc->add_option("--batch-size", tr.tc.batch_size, "batch size");
  trc->add_option("--stage1-epochs", tr.stage1_epochs, "modal matching epochs");
  trc->add_option("--stage2-epochs", tr.stage2_epochs, "fine-tuning epochs per subset");
  trc->add_option("--n-subsets", tr.tc.n_subsets, "training subsets");
  trc->add_option("--top-k", tr.tc.top_k_checkpoints, "checkpoints to keep");
  trc->add_option("--gate-mode", tr.gate_mode, "learned|fixed_one|fixed_zero");
  trc->add_option("--teacher", tr.teacher, "teacher name (toy)");
  auto* ts_opt = trc->add_option("--teacher-seed", tr.tc.teacher_seed,
                                 "teacher table seed (default: from meta.json)");
  trc->add_option("--d-model", tr.d_model, "model width");
  trc->add_option("--enc-layers", tr.enc_layers, "encoder layers");
  trc->add_option("--dec-layers", tr.dec_layers, "decoder layers");
  trc->add_option("--heads", tr.heads, "attention heads");
  trc->add_option("--ffn", tr.ffn, "feed-forward width");
  trc->add_option("--seed", tr.seed, "training seed");
  trc->add_option("--config", tr.config_path, "key=value file overriding flags");

  // evaluate
  std::string eval_data, eval_json;
  std::vector<std::string> eval_ckpts;
  std::size_t eval_beam = 5;
  auto* ev = app.add_subcommand("evaluate", "score checkpoints on a split");
  ev->add_option("--data", eval_data, "corpus directory")->required();
  ev->add_option("--checkpoint", eval_ckpts, "checkpoint file (repeatable; metrics averaged)")
      ->required();
  ev->add_option("--beam-size", eval_beam, "beam size");
  ev->add_option("--json-out", eval_json, "write the mean report as JSON");

  // summarize
  std::string sum_data, sum_ckpt, sum_doc;
  std::size_t sum_beam = 5;
  auto* sm = app.add_subcommand("summarize", "summarize one document");
  sm->add_option("--data", sum_data, "corpus directory")->required();
  sm->add_option("--checkpoint", sum_ckpt, "checkpoint file")->required();
  sm->add_option("--doc-id", sum_doc, "document id")->required();
  sm->add_option("--beam-size", sum_beam, "beam size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gd) {
      if (!gen_config_file.empty()) {
        KvOverride kv;
        kv.bind("n_docs", &gen.n_docs);
        kv.bind("vocab_size", &gen.vocab_size);
        kv.bind("n_entities", &gen.n_entities);
        kv.bind("n_relations", &gen.n_relations);
        kv.bind("d_q", &gen.d_q);
        kv.bind("n_queries", &gen.n_queries);
        kv.bind("images_per_doc", &gen.images_per_doc);
        kv.bind("max_images", &gen.max_images);
        kv.bind("topics_per_doc", &gen.topics_per_doc);
        kv.bind("max_context", &gen.max_context);
        kv.bind("max_summary_len", &gen.max_summary_len);
        kv.bind("entity_dim", &gen.entity_dim);
        kv.bind("feature_noise", &gen.feature_noise);
        kv.bind("seed", &gen.seed);
        kv.bind("teacher_seed", &gen.teacher_seed);
        kv.apply(gen_config_file);
      }
      return cmd_gen_data(gen_out, gen, gen_sidefile);
    }
    if (*tt) {
      if (!transe_config_file.empty()) {
        KvOverride kv;
        kv.bind("dim", &transe.dim);
        kv.bind("epochs", &transe.epochs);
        kv.bind("margin", &transe.margin);
        kv.bind("lr", &transe.learning_rate);
        kv.bind("seed", &transe.seed);
        kv.apply(transe_config_file);
      }
      return cmd_train_transe(transe_triples, transe_out, transe);
    }
    if (*trc) {
      tr.teacher_seed_set = ts_opt->count() > 0;
      if (!tr.config_path.empty()) {
        KvOverride kv;
        kv.bind("alpha", &tr.tc.alpha);
        kv.bind("tau", &tr.tc.tau);
        kv.bind("lr", &tr.tc.learning_rate);
        kv.bind("batch_size", &tr.tc.batch_size);
        kv.bind("stage1_epochs", &tr.stage1_epochs);
        kv.bind("stage2_epochs", &tr.stage2_epochs);
        kv.bind("n_subsets", &tr.tc.n_subsets);
        kv.bind("top_k", &tr.tc.top_k_checkpoints);
        kv.bind("gate_mode", &tr.gate_mode);
        kv.bind("teacher", &tr.teacher);
        kv.bind("d_model", &tr.d_model);
        kv.bind("enc_layers", &tr.enc_layers);
        kv.bind("dec_layers", &tr.dec_layers);
        kv.bind("heads", &tr.heads);
        kv.bind("ffn", &tr.ffn);
        kv.bind("seed", &tr.seed);
        kv.setters["teacher_seed"] = [&tr](const std::string& v) {
          tr.tc.teacher_seed = std::stoull(v);
          tr.teacher_seed_set = true;
        };
        kv.apply(tr.config_path);
      }
      return cmd_train(tr);
    }
    if (*ev) return cmd_evaluate(eval_data, eval_ckpts, eval_beam, eval_json);
    if (*sm) return cmd_summarize(sum_data, sum_ckpt, sum_doc, sum_beam);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
