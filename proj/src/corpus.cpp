#include "mmsum/corpus/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmsum/model/image_selection.hpp"
#include "mmsum/nn/checkpoint.hpp"
#include "mmsum/nn/rng.hpp"
#include "mmsum/nn/tensor.hpp"

using json = nlohmann::json;
using mmsum::nn::check;
using mmsum::nn::fail;
using mmsum::nn::Rng;

namespace mmsum::corpus {

Vocab Vocab::with_reserved() {
  Vocab v;
  for (const char* w : {"<pad>", "<unk>", "<cls>", "<sep>", "<kcls>", "<s>", "</s>"}) v.add(w);
  return v;
}

TokenId Vocab::add(const std::string& word) {
  check(!word.empty(), "vocab: empty word");
  check(index.find(word) == index.end(), "vocab: duplicate word '" + word + "'");
  const TokenId id = static_cast<TokenId>(words.size());
  words.push_back(word);
  index.emplace(word, id);
  return id;
}

TokenId Vocab::lookup(const std::string& word) const {
  auto it = index.find(word);
  return it == index.end() ? special::unk : it->second;
}

std::string Vocab::text(const std::vector<TokenId>& ids, const std::string& sep) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < words.size(),
          "vocab: token id out of range");
    if (i) out += sep;
    out += words[ids[i]];
  }
  return out;
}

std::vector<TokenId> tokenize(const std::string& text, const Vocab& vocab) {
  std::vector<TokenId> out;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      out.push_back(vocab.lookup(word));
      word.clear();
    }
  };
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c) && c != '-' && c != '<' && c != '>' && c != '/') {
      flush();
      out.push_back(vocab.lookup(std::string(1, static_cast<char>(std::tolower(c)))));
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::vector<TokenId> Document::text_tokens() const {
  std::vector<TokenId> out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::size_t Document::n_text_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::size_t Document::text_encoder_rows() const {
  return n_text_tokens() + 2 * std::max<std::size_t>(sentences.size(), 1);
}

std::vector<EntityMention> extract_entities(const std::vector<std::vector<TokenId>>& sentences,
                                            const EntityLexicon& lexicon) {
  // Entries bucketed by first token, longest surface first.
  std::unordered_map<TokenId, std::vector<std::size_t>> heads;
  for (std::size_t e = 0; e < lexicon.entries.size(); ++e) {
    const auto& toks = lexicon.entries[e].tokens;
    if (!toks.empty()) heads[toks[0]].push_back(e);
  }
  for (auto& [tok, list] : heads)
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      const auto la = lexicon.entries[a].tokens.size(), lb = lexicon.entries[b].tokens.size();
      return la != lb ? la > lb : a < b;
    });

  std::vector<EntityMention> out;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& sent = sentences[s];
    std::size_t i = 0;
    while (i < sent.size()) {
      std::size_t advance = 1;
      auto it = heads.find(sent[i]);
      if (it != heads.end()) {
        for (std::size_t e : it->second) {
          const auto& toks = lexicon.entries[e].tokens;
          if (i + toks.size() <= sent.size() &&
              std::equal(toks.begin(), toks.end(), sent.begin() + static_cast<long>(i))) {
            out.push_back({static_cast<EntityId>(e), static_cast<std::int32_t>(s),
                           static_cast<std::int32_t>(i)});
            advance = toks.size();
            break;
          }
        }
      }
      i += advance;
    }
  }
  return out;
}

bool TripleStore::contains(std::int32_t h, std::int32_t r, std::int32_t t) const {
  return std::find(triples.begin(), triples.end(), Triple{h, r, t}) != triples.end();
}

void TripleStore::add(std::int32_t h, std::int32_t r, std::int32_t t) {
  check(h >= 0 && h < n_entities && t >= 0 && t < n_entities, "triple store: entity id out of range");
  check(r >= 0 && r < n_relations, "triple store: relation id out of range");
  check(!contains(h, r, t), "triple store: duplicate triple");
  triples.push_back({h, r, t});
}

namespace {

const char* kCategories[8] = {"action",   "object", "people",   "language",
                              "property", "time",   "relation", "quantity"};

// Row-vector times the inverse of a square matrix, via Gauss-Jordan.
// Used to plant feature means the teacher's frozen projection maps back
// onto a chosen target vector.
std::vector<double> invert_square(const std::vector<double>& m, std::size_t n) {
  std::vector<double> a = m;
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    check(std::abs(a[piv * n + col]) > 1e-12, "teacher projection is singular");
    if (piv != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a[piv * n + j], a[col * n + j]);
        std::swap(inv[piv * n + j], inv[col * n + j]);
      }
    const double d = a[col * n + col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col * n + j] /= d;
      inv[col * n + j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r * n + j] -= f * a[col * n + j];
        inv[r * n + j] -= f * inv[col * n + j];
      }
    }
  }
  return inv;
}

std::vector<double> row_times(const std::vector<double>& row, const std::vector<double>& m,
                              std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double rv = row[k];
    if (rv == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += rv * m[k * n + j];
  }
  return out;
}

std::string doc_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "doc%04zu", i);
  return buf;
}

}  // namespace

Corpus generate_corpus(const GenConfig& cfg) {
  check(cfg.vocab_size >= 48, "gen: vocab_size must be at least 48");
  check(cfg.n_entities >= cfg.topics_per_doc + 1, "gen: need more entities than topics per doc");
  check(cfg.n_relations >= 1 && cfg.topics_per_doc >= 1, "gen: sizes must be positive");
  check(cfg.images_per_doc >= 1 && cfg.images_per_doc <= cfg.max_images,
        "gen: images_per_doc must lie in [1, max_images]");
  check(cfg.d_q >= 2 && cfg.n_queries >= 1, "gen: feature dims must be positive");

  Rng root(cfg.seed);
  Corpus corpus;
  corpus.config = cfg;

  // Vocabulary: reserved ids, ".", a small glue pool, then entity words.
  Vocab& vocab = corpus.vocab;
  vocab = Vocab::with_reserved();
  const TokenId period = vocab.add(".");
  Rng wrng = root.fork(1);
  const std::string consonants = "bdfgklmnprstvz";
  const std::string vowels = "aeiou";
  while (vocab.size() < cfg.vocab_size) {
    std::string w;
    const std::size_t n_syll = 2 + wrng.below(2);
    for (std::size_t s = 0; s < n_syll; ++s) {
      w += consonants[wrng.below(consonants.size())];
      w += vowels[wrng.below(vowels.size())];
    }
    if (vocab.index.find(w) == vocab.index.end()) vocab.add(w);
  }
  const TokenId glue_begin = period + 1;
  const TokenId glue_end = glue_begin + 12;  // ids [glue_begin, glue_end)
  const TokenId intro_word = glue_begin;
  const TokenId and_word = glue_begin + 1;
  const TokenId entity_word_begin = glue_end;
  const auto entity_word_count = static_cast<std::size_t>(
      static_cast<TokenId>(cfg.vocab_size) - entity_word_begin);
  check(entity_word_count >= 8, "gen: vocab too small for the entity word pool");

  // Entity lexicon: 1-3 entity-pool words per surface, unique sequences.
  EntityLexicon& lexicon = corpus.lexicon;
  lexicon.embedding_dim = cfg.entity_dim;
  Rng erng = root.fork(2);
  std::set<std::vector<TokenId>> used_surfaces;
  while (lexicon.entries.size() < cfg.n_entities) {
    const std::size_t len = 1 + erng.below(3);
    std::vector<TokenId> toks;
    for (std::size_t i = 0; i < len; ++i)
      toks.push_back(entity_word_begin + static_cast<TokenId>(erng.below(entity_word_count)));
    if (!used_surfaces.insert(toks).second) continue;
    LexiconEntry entry;
    entry.tokens = toks;
    entry.surface = vocab.text(toks);
    entry.category = kCategories[erng.below(8)];
    lexicon.entries.push_back(std::move(entry));
  }

  // Knowledge triples over the lexicon.
  TripleStore& store = corpus.triples;
  store.n_entities = static_cast<std::int32_t>(cfg.n_entities);
  store.n_relations = static_cast<std::int32_t>(cfg.n_relations);
  Rng trng = root.fork(3);
  for (std::int32_t h = 0; h < store.n_entities; ++h) {
    const std::size_t want = 2 + trng.below(2);
    for (std::size_t k = 0; k < want; ++k) {
      for (int attempt = 0; attempt < 16; ++attempt) {
        const auto r = static_cast<std::int32_t>(trng.below(cfg.n_relations));
        const auto t = static_cast<std::int32_t>(trng.below(cfg.n_entities));
        if (t == h || store.contains(h, r, t)) continue;
        store.add(h, r, t);
        break;
      }
    }
  }

  // Per-entity feature means, planted so the default teacher's image
  // vector lands on the entity's summary-token direction.
  model::ToyTeacher teacher(cfg.vocab_size, cfg.d_q, cfg.teacher_seed);
  const std::vector<double> proj_inv = invert_square(teacher.image_proj(), cfg.d_q);
  std::vector<std::vector<double>> entity_mean(cfg.n_entities);
  for (std::size_t e = 0; e < cfg.n_entities; ++e) {
    std::vector<double> target(cfg.d_q, 0.0);
    const auto& toks = lexicon.entries[e].tokens;
    for (TokenId t : toks)
      for (std::size_t j = 0; j < cfg.d_q; ++j)
        target[j] += teacher.token_table()[static_cast<std::size_t>(t) * cfg.d_q + j];
    for (double& v : target) v /= static_cast<double>(toks.size());
    entity_mean[e] = row_times(target, proj_inv, cfg.d_q);
  }

  for (std::size_t di = 0; di < cfg.n_docs; ++di) {
    Rng drng = root.fork(100 + di);
    Document doc;
    doc.id = doc_id(di);

    // Topic entities (realized in the summary) plus one distractor that
    // appears in the text only.
    std::vector<EntityId> topics;
    while (topics.size() < cfg.topics_per_doc) {
      const auto e = static_cast<EntityId>(drng.below(cfg.n_entities));
      if (std::find(topics.begin(), topics.end(), e) == topics.end()) topics.push_back(e);
    }
    EntityId distractor = topics[0];
    while (std::find(topics.begin(), topics.end(), distractor) != topics.end())
      distractor = static_cast<EntityId>(drng.below(cfg.n_entities));

    // Sentences: round-robin the mentions, pad with glue words.
    std::vector<EntityId> mentions = topics;
    mentions.push_back(distractor);
    const std::size_t n_sent = 2 + drng.below(2);
    doc.sentences.assign(n_sent, {});
    std::vector<std::vector<EntityId>> per_sentence(n_sent);
    for (std::size_t m = 0; m < mentions.size(); ++m)
      per_sentence[m % n_sent].push_back(mentions[m]);
    auto glue = [&]() {
      return static_cast<TokenId>(glue_begin + static_cast<TokenId>(drng.below(12)));
    };
    for (std::size_t s = 0; s < n_sent; ++s) {
      auto& sent = doc.sentences[s];
      sent.push_back(glue());
      if (drng.below(2)) sent.push_back(glue());
      for (EntityId e : per_sentence[s]) {
        const auto& toks = lexicon.entries[e].tokens;
        sent.insert(sent.end(), toks.begin(), toks.end());
        sent.push_back(glue());
      }
      sent.push_back(period);
    }

    // Summary: intro word, topic surfaces joined by the and-word, period.
    doc.summary.push_back(intro_word);
    for (std::size_t t = 0; t < topics.size(); ++t) {
      if (t) doc.summary.push_back(and_word);
      const auto& toks = lexicon.entries[topics[t]].tokens;
      doc.summary.insert(doc.summary.end(), toks.begin(), toks.end());
    }
    doc.summary.push_back(period);
    check(doc.summary.size() <= cfg.max_summary_len,
          "gen: infeasible config, summary length " + std::to_string(doc.summary.size()) +
              " exceeds max_summary_len " + std::to_string(cfg.max_summary_len));

    doc.entities = extract_entities(doc.sentences, lexicon);

    // Images: cycle topic + distractor sources, shuffle, plant features.
    std::vector<EntityId> sources(cfg.images_per_doc);
    for (std::size_t i = 0; i < sources.size(); ++i) sources[i] = mentions[i % mentions.size()];
    for (std::size_t i = sources.size(); i-- > 1;)
      std::swap(sources[i], sources[drng.below(i + 1)]);
    for (EntityId src : sources) {
      ImageFeatures img;
      img.n_queries = cfg.n_queries;
      img.d_q = cfg.d_q;
      img.data.resize(cfg.n_queries * cfg.d_q);
      const auto& mean = entity_mean[src];
      double rms = 0.0;
      for (double v : mean) rms += v * v;
      rms = std::sqrt(rms / static_cast<double>(cfg.d_q));
      const double sigma = cfg.feature_noise * (rms > 0 ? rms : 1.0);
      for (std::size_t q = 0; q < cfg.n_queries; ++q)
        for (std::size_t j = 0; j < cfg.d_q; ++j)
          img.data[q * cfg.d_q + j] = mean[j] + drng.normal(0.0, sigma);
      doc.images.push_back(std::move(img));
    }

    // Reference images: sources extractable from the summary, capped at 3.
    std::set<EntityId> summary_entities;
    for (const auto& m : extract_entities({doc.summary}, lexicon)) summary_entities.insert(m.entity);
    std::vector<std::int32_t> refs;
    for (std::size_t i = 0; i < sources.size() && refs.size() < 3; ++i)
      if (summary_entities.count(sources[i])) refs.push_back(static_cast<std::int32_t>(i));
    check(!refs.empty(), "gen: document " + doc.id + " has no reference image");
    doc.reference_images = std::move(refs);

    const std::size_t image_rows = cfg.images_per_doc * (cfg.n_queries + 1);
    check(doc.text_encoder_rows() + image_rows <= cfg.max_context,
          "gen: document exceeds max_context");
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

// ---------------------------------------------------------------------
// persistence

namespace {

json doc_to_json(const Document& doc) {
  json j;
  j["id"] = doc.id;
  j["text_tokens"] = doc.sentences;  // token ids, nested per sentence
  json ents = json::array();
  for (const auto& m : doc.entities)
    ents.push_back({{"id", m.entity}, {"sentence", m.sentence}, {"pos", m.token_pos}});
  j["entities"] = ents;
  j["summary"] = doc.summary;
  if (doc.reference_images) j["reference_images"] = *doc.reference_images;
  return j;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  check(out.good(), "cannot open " + path + " for writing");
  for (const auto& l : lines) out << l << "\n";
  check(out.good(), "write failed for " + path);
}

[[noreturn]] void line_fail(std::size_t line_no, const std::string& msg) {
  fail("line " + std::to_string(line_no) + ": " + msg);
}

}  // namespace

void save_corpus_jsonl(const std::vector<Document>& docs, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(docs.size());
  for (const auto& doc : docs) {
    json j = doc_to_json(doc);
    json imgs = json::array();
    for (const auto& img : doc.images) {
      json rows = json::array();
      for (std::size_t q = 0; q < img.n_queries; ++q)
        rows.push_back(std::vector<double>(img.data.begin() + static_cast<long>(q * img.d_q),
                                           img.data.begin() + static_cast<long>((q + 1) * img.d_q)));
      imgs.push_back(rows);
    }
    j["images"] = imgs;
    lines.push_back(j.dump());
  }
  write_lines(path, lines);
}

void save_corpus_jsonl_sidefile(const std::vector<Document>& docs, const std::string& path,
                                const std::string& features_filename) {
  nn::NamedArrays features;
  std::vector<std::string> lines;
  for (const auto& doc : docs) {
    json j = doc_to_json(doc);
    j["images_file"] = features_filename;
    json keys = json::array();
    for (std::size_t i = 0; i < doc.images.size(); ++i) {
      const auto& img = doc.images[i];
      const std::string key = doc.id + ".img" + std::to_string(i);
      features.put(key, {img.n_queries, img.d_q}, img.data);
      keys.push_back(key);
    }
    j["images_keys"] = keys;
    lines.push_back(j.dump());
  }
  write_lines(path, lines);
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "" : path.substr(0, slash + 1);
  save_named_arrays(features, dir + features_filename);
}

std::vector<Document> load_corpus_jsonl(const std::string& path, std::size_t max_context,
                                      const EntityLexicon* lexicon) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "" : path.substr(0, slash + 1);

  std::vector<Document> docs;
  std::map<std::string, nn::NamedArrays> side_files;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      line_fail(line_no, std::string("malformed JSON: ") + e.what());
    }
    const char* required[] = {"id", "text_tokens", "entities", "summary"};
    for (const char* field : required)
      if (!j.contains(field)) line_fail(line_no, std::string("missing ") + field);
    if (!j.contains("images") && !j.contains("images_file")) line_fail(line_no, "missing images");

    Document doc;
    try {
      doc.id = j["id"].get<std::string>();
      doc.sentences = j["text_tokens"].get<std::vector<std::vector<TokenId>>>();
      doc.summary = j["summary"].get<std::vector<TokenId>>();
      for (const auto& e : j["entities"]) {
        EntityMention m;
        m.entity = e.at("id").get<EntityId>();
        m.sentence = e.at("sentence").get<std::int32_t>();
        m.token_pos = e.value("pos", 0);
        doc.entities.push_back(m);
      }
      if (j.contains("images")) {
        for (const auto& rows : j["images"]) {
          ImageFeatures img;
          img.n_queries = rows.size();
          for (const auto& row : rows) {
            if (img.d_q == 0) img.d_q = row.size();
            if (row.size() != img.d_q) line_fail(line_no, "ragged image feature rows");
            for (const auto& v : row) img.data.push_back(v.get<double>());
          }
          doc.images.push_back(std::move(img));
        }
      } else {
        const std::string file = j["images_file"].get<std::string>();
        if (!j.contains("images_keys")) line_fail(line_no, "missing images_keys");
        auto it = side_files.find(file);
        if (it == side_files.end())
          it = side_files.emplace(file, nn::load_named_arrays(dir + file)).first;
        for (const auto& key : j["images_keys"]) {
          const auto& arr = it->second.get(key.get<std::string>());
          if (arr.shape.size() != 2) line_fail(line_no, "image feature array must be rank 2");
          ImageFeatures img;
          img.n_queries = arr.shape[0];
          img.d_q = arr.shape[1];
          img.data = arr.data;
          doc.images.push_back(std::move(img));
        }
      }
      if (j.contains("reference_images"))
        doc.reference_images = j["reference_images"].get<std::vector<std::int32_t>>();
    } catch (const json::exception& e) {
      line_fail(line_no, std::string("bad field: ") + e.what());
    }

    // Validation against the document invariants.
    std::size_t n_queries = 0, d_q = 0;
    for (std::size_t i = 0; i < doc.images.size(); ++i) {
      const auto& img = doc.images[i];
      if (img.n_queries == 0 || img.d_q == 0) line_fail(line_no, "empty image feature block");
      if (img.data.size() != img.n_queries * img.d_q)
        line_fail(line_no, "image feature size mismatch");
      if (i == 0) {
        n_queries = img.n_queries;
        d_q = img.d_q;
      } else if (img.n_queries != n_queries || img.d_q != d_q) {
        line_fail(line_no, "inconsistent image feature shapes within document");
      }
      for (double v : img.data)
        if (!std::isfinite(v)) line_fail(line_no, "non-finite image feature value");
    }
    for (const auto& m : doc.entities) {
      if (m.sentence < 0 || static_cast<std::size_t>(m.sentence) >= doc.sentences.size())
        line_fail(line_no, "entity sentence index out of range");
      if (m.entity < 0 || (lexicon && static_cast<std::size_t>(m.entity) >= lexicon->size()))
        line_fail(line_no, "entity id " + std::to_string(m.entity) + " not in lexicon");
    }
    if (doc.reference_images)
      for (std::int32_t r : *doc.reference_images)
        if (r < 0 || static_cast<std::size_t>(r) >= doc.images.size())
          line_fail(line_no, "reference image index out of range");
    const std::size_t rows = doc.text_encoder_rows() + doc.images.size() * (n_queries + 1);
    if (rows > max_context)
      line_fail(line_no, "encoder sequence length " + std::to_string(rows) +
                             " exceeds max_context " + std::to_string(max_context));
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_vocab_tsv(const Vocab& vocab, const std::string& path) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < vocab.words.size(); ++i)
    lines.push_back(vocab.words[i] + "\t" + std::to_string(i));
  write_lines(path, lines);
}

Vocab load_vocab_tsv(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  std::vector<std::string> words;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) line_fail(line_no, "expected word\\tid");
    const std::string word = line.substr(0, tab);
    const std::size_t id = std::stoul(line.substr(tab + 1));
    if (id != words.size()) line_fail(line_no, "ids must be dense and ascending");
    words.push_back(word);
  }
  Vocab v;
  for (const auto& w : words) v.add(w);
  check(v.size() > static_cast<std::size_t>(special::first_word),
        "vocab file lacks the reserved tokens");
  return v;
}

void save_lexicon_tsv(const EntityLexicon& lexicon, const std::string& path) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < lexicon.entries.size(); ++i) {
    const auto& e = lexicon.entries[i];
    lines.push_back(e.surface + "\t" + std::to_string(i) + "\t" + e.category);
  }
  write_lines(path, lines);
}

EntityLexicon load_lexicon_tsv(const std::string& path, const Vocab& vocab,
                               std::size_t embedding_dim) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  EntityLexicon lex;
  lex.embedding_dim = embedding_dim;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    if (t1 == std::string::npos) line_fail(line_no, "expected surface\\tid\\tcategory");
    const auto t2 = line.find('\t', t1 + 1);
    LexiconEntry e;
    e.surface = line.substr(0, t1);
    const std::string id_str =
        t2 == std::string::npos ? line.substr(t1 + 1) : line.substr(t1 + 1, t2 - t1 - 1);
    if (t2 != std::string::npos) e.category = line.substr(t2 + 1);
    if (std::stoul(id_str) != lex.entries.size())
      line_fail(line_no, "entity ids must be dense and ascending");
    if (!seen.insert(e.surface).second) line_fail(line_no, "duplicate surface form");
    e.tokens = tokenize(e.surface, vocab);
    if (e.tokens.empty()) line_fail(line_no, "empty surface form");
    lex.entries.push_back(std::move(e));
  }
  return lex;
}

void save_triples_tsv(const TripleStore& store, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& t : store.triples)
    lines.push_back(std::to_string(t.head) + "\t" + std::to_string(t.relation) + "\t" +
                    std::to_string(t.tail));
  write_lines(path, lines);
}

TripleStore load_triples_tsv(const std::string& path, std::int32_t n_entities,
                             std::int32_t n_relations) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  std::vector<TripleStore::Triple> raw;
  std::string line;
  std::size_t line_no = 0;
  std::int32_t max_e = -1, max_r = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TripleStore::Triple t;
    if (!(ls >> t.head >> t.relation >> t.tail)) line_fail(line_no, "expected h\\tr\\tt");
    max_e = std::max({max_e, t.head, t.tail});
    max_r = std::max(max_r, t.relation);
    raw.push_back(t);
  }
  TripleStore store;
  store.n_entities = n_entities > 0 ? n_entities : max_e + 1;
  store.n_relations = n_relations > 0 ? n_relations : max_r + 1;
  for (const auto& t : raw) store.add(t.head, t.relation, t.tail);
  return store;
}

void save_meta_json(const GenConfig& cfg, const std::string& path) {
  json j;
  j["n_docs"] = cfg.n_docs;
  j["vocab_size"] = cfg.vocab_size;
  j["n_entities"] = cfg.n_entities;
  j["n_relations"] = cfg.n_relations;
  j["d_q"] = cfg.d_q;
  j["n_queries"] = cfg.n_queries;
  j["max_images"] = cfg.max_images;
  j["images_per_doc"] = cfg.images_per_doc;
  j["topics_per_doc"] = cfg.topics_per_doc;
  j["max_context"] = cfg.max_context;
  j["max_summary_len"] = cfg.max_summary_len;
  j["entity_dim"] = cfg.entity_dim;
  j["seed"] = cfg.seed;
  j["teacher_seed"] = cfg.teacher_seed;
  j["feature_noise"] = cfg.feature_noise;
  std::ofstream out(path, std::ios::trunc);
  check(out.good(), "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

GenConfig load_meta_json(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(path + ": malformed JSON: " + e.what());
  }
  GenConfig cfg;
  cfg.n_docs = j.value("n_docs", cfg.n_docs);
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  cfg.n_entities = j.value("n_entities", cfg.n_entities);
  cfg.n_relations = j.value("n_relations", cfg.n_relations);
  cfg.d_q = j.value("d_q", cfg.d_q);
  cfg.n_queries = j.value("n_queries", cfg.n_queries);
  cfg.max_images = j.value("max_images", cfg.max_images);
  cfg.images_per_doc = j.value("images_per_doc", cfg.images_per_doc);
  cfg.topics_per_doc = j.value("topics_per_doc", cfg.topics_per_doc);
  cfg.max_context = j.value("max_context", cfg.max_context);
  cfg.max_summary_len = j.value("max_summary_len", cfg.max_summary_len);
  cfg.entity_dim = j.value("entity_dim", cfg.entity_dim);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.teacher_seed = j.value("teacher_seed", cfg.teacher_seed);
  cfg.feature_noise = j.value("feature_noise", cfg.feature_noise);
  return cfg;
}

}  // namespace mmsum::corpus
