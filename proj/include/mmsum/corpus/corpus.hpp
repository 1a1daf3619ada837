#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmsum::corpus {

using TokenId = std::int32_t;
using EntityId = std::int32_t;

// Reserved token ids, fixed for every vocabulary. The entity-group
// delimiter k_cls reserves a vocabulary slot but is embedded through the
// entity table, not the token table.
namespace special {
inline constexpr TokenId pad = 0;
inline constexpr TokenId unk = 1;
inline constexpr TokenId text_cls = 2;  // sentence-start delimiter
inline constexpr TokenId text_sep = 3;  // sentence-end delimiter
inline constexpr TokenId k_cls = 4;     // entity-group delimiter
inline constexpr TokenId bos = 5;       // decoder start
inline constexpr TokenId eos = 6;
inline constexpr TokenId first_word = 7;
}  // namespace special

struct Vocab {
  std::vector<std::string> words;  // words[id] = surface form
  std::unordered_map<std::string, TokenId> index;

  static Vocab with_reserved();
  TokenId add(const std::string& word);
  TokenId lookup(const std::string& word) const;  // unk when absent
  std::size_t size() const { return words.size(); }
  std::string text(const std::vector<TokenId>& ids, const std::string& sep = " ") const;
};

// Lowercases, splits on whitespace, emits punctuation as standalone
// tokens, maps unknown words to unk. Deterministic; "" -> [].
std::vector<TokenId> tokenize(const std::string& text, const Vocab& vocab);

// One image as a fixed number of query-conditioned feature rows.
struct ImageFeatures {
  std::size_t n_queries = 0;
  std::size_t d_q = 0;
  std::vector<double> data;  // row-major n_queries x d_q
};

struct EntityMention {
  EntityId entity = 0;
  std::int32_t sentence = 0;   // source-sentence index
  std::int32_t token_pos = 0;  // first matched token within the sentence
};

struct Document {
  std::string id;
  std::vector<std::vector<TokenId>> sentences;
  std::vector<ImageFeatures> images;
  std::vector<EntityMention> entities;
  std::vector<TokenId> summary;
  // Present only where test-split semantics apply.
  std::optional<std::vector<std::int32_t>> reference_images;

  std::vector<TokenId> text_tokens() const;
  std::size_t n_text_tokens() const;
  // Row count of the text side once sentence delimiters are added.
  std::size_t text_encoder_rows() const;
};

struct LexiconEntry {
  std::string surface;          // space-joined lowercased words
  std::vector<TokenId> tokens;  // surface tokenized against the vocab
  std::string category;         // optional tag, may be empty
};

// Entity id == index into entries (dense 0..|E|-1, unique surfaces).
struct EntityLexicon {
  std::vector<LexiconEntry> entries;
  std::size_t embedding_dim = 32;
  std::size_t size() const { return entries.size(); }
};

// Greedy left-to-right longest-match over lexicon surface forms, per
// sentence. Matched spans never overlap; output preserves textual order.
std::vector<EntityMention> extract_entities(const std::vector<std::vector<TokenId>>& sentences,
                                            const EntityLexicon& lexicon);

struct TripleStore {
  struct Triple {
    std::int32_t head = 0, relation = 0, tail = 0;
    bool operator==(const Triple&) const = default;
  };
  std::int32_t n_entities = 0;
  std::int32_t n_relations = 0;
  std::vector<Triple> triples;

  bool contains(std::int32_t h, std::int32_t r, std::int32_t t) const;
  void add(std::int32_t h, std::int32_t r, std::int32_t t);  // range + duplicate checked
};

struct GenConfig {
  std::size_t n_docs = 16;
  std::size_t vocab_size = 200;
  std::size_t n_entities = 20;
  std::size_t n_relations = 4;
  std::size_t d_q = 32;
  std::size_t n_queries = 4;
  std::size_t max_images = 8;
  std::size_t images_per_doc = 3;
  std::size_t topics_per_doc = 2;
  std::size_t max_context = 1024;
  std::size_t max_summary_len = 32;
  std::size_t entity_dim = 32;  // recorded on the lexicon
  std::uint64_t seed = 7;
  std::uint64_t teacher_seed = 99;
  double feature_noise = 0.05;
};

struct Corpus {
  std::vector<Document> docs;
  Vocab vocab;
  EntityLexicon lexicon;
  TripleStore triples;
  GenConfig config;
};

// Synthetic corpus with a built-in learnable signal: each document's
// summary is a fixed-grammar realization of its topic entities, every
// image feature block encodes one in-article entity (plus noise) in a way
// the default teacher's cosine score can see, and reference_images are
// the images whose source entity is extractable from the summary (capped
// at 3). Deterministic given the config seed.
Corpus generate_corpus(const GenConfig& cfg);

// --- persistence -----------------------------------------------------

// One JSON object per line; image features inline, or in a named-array
// side file referenced as {"images_file": ..., "images_keys": [...]}.
void save_corpus_jsonl(const std::vector<Document>& docs, const std::string& path);
void save_corpus_jsonl_sidefile(const std::vector<Document>& docs, const std::string& path,
                                const std::string& features_filename);
// Validates every line; errors name the line and field. `lexicon`, when
// given, bounds entity ids.
std::vector<Document> load_corpus_jsonl(const std::string& path, std::size_t max_context = 1024,
                                      const EntityLexicon* lexicon = nullptr);

void save_vocab_tsv(const Vocab& vocab, const std::string& path);
Vocab load_vocab_tsv(const std::string& path);

// surface \t entity_id \t category
void save_lexicon_tsv(const EntityLexicon& lexicon, const std::string& path);
EntityLexicon load_lexicon_tsv(const std::string& path, const Vocab& vocab,
                               std::size_t embedding_dim = 32);

// head \t relation \t tail
void save_triples_tsv(const TripleStore& store, const std::string& path);
TripleStore load_triples_tsv(const std::string& path, std::int32_t n_entities = 0,
                             std::int32_t n_relations = 0);

void save_meta_json(const GenConfig& cfg, const std::string& path);
GenConfig load_meta_json(const std::string& path);

}  // namespace mmsum::corpus
