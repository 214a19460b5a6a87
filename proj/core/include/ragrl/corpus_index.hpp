// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ragrl::retrieval {

inline constexpr std::size_t kMaxChunkWords = 100;

struct CorpusChunk {
  std::string doc_id;
  std::string chunk_id;
  std::string text;
  std::string source_title;

  bool operator==(const CorpusChunk&) const = default;
};

/// Reads one {"doc_id", "chunk_id", "title", "text"} record per line.
std::vector<CorpusChunk> read_corpus_jsonl(const std::filesystem::path& path);

/// Splits a document into consecutive passages of at most `max_words` words;
/// chunk ids are "<doc_id>#<n>".
std::vector<CorpusChunk> chunk_document(const std::string& doc_id, const std::string& title,
                                        std::string_view text,
                                        std::size_t max_words = kMaxChunkWords);

/// Okapi BM25 free parameters.
struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

struct Posting {
  std::uint32_t chunk = 0;
  std::uint32_t tf = 0;
};

/// Immutable inverted index over corpus chunks.
class CorpusIndex {
 public:
  /// Throws EmptyCorpus, DuplicateChunkId, or InvalidArgument for an empty or
  /// over-long passage.
  static CorpusIndex build(std::vector<CorpusChunk> chunks, Bm25Params params = {});

  std::size_t size() const noexcept { return chunks_.size(); }
  const CorpusChunk& chunk(std::size_t i) const { return chunks_.at(i); }
  const std::vector<CorpusChunk>& chunks() const noexcept { return chunks_; }
  const Bm25Params& params() const noexcept { return params_; }

  std::uint32_t length(std::size_t i) const { return lengths_.at(i); }
  double average_length() const noexcept { return avg_length_; }
  std::span<const Posting> postings(std::string_view term) const;
  /// Position of chunk i in ascending chunk_id order; the tie-break key.
  std::uint32_t id_rank(std::size_t i) const { return id_rank_.at(i); }

  /// Persists the chunk list; load() rebuilds the identical index from it.
  void save(const std::filesystem::path& path) const;
  static CorpusIndex load(const std::filesystem::path& path);

 private:
  std::vector<CorpusChunk> chunks_;
  Bm25Params params_;
  std::vector<std::uint32_t> lengths_;
  std::vector<std::uint32_t> id_rank_;
  double avg_length_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

struct ScoredChunk {
  CorpusChunk chunk;
  double score = 0.0;
};

/// Scores every chunk of an index against a query.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> score_all(const CorpusIndex& index, std::string_view query) const = 0;
};

class Bm25Scorer final : public Scorer {
 public:
  std::vector<double> score_all(const CorpusIndex& index, std::string_view query) const override;
};

/// Produces one embedding vector per input text.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
};

/// OpenAI-style embeddings endpoint: {"input": [...]} -> {"data": [{"embedding": [...]}]}.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint, std::string model, std::string api_key = {});
  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;

 private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
};

/// Cosine similarity against chunk embeddings computed once at construction.
class DenseScorer final : public Scorer {
 public:
  DenseScorer(std::shared_ptr<Embedder> embedder, const CorpusIndex& index,
              std::size_t batch_size = 64);
  std::vector<double> score_all(const CorpusIndex& index, std::string_view query) const override;

 private:
  std::shared_ptr<Embedder> embedder_;
  std::vector<std::vector<float>> chunk_vectors_;
};

/// Top-k chunks by score, descending, ties broken by ascending chunk_id.
/// Zero-score chunks are eligible, so k >= size() returns the whole corpus.
/// Throws EmptyQuery for a blank query and InvalidArgument for k == 0.
std::vector<ScoredChunk> search(const CorpusIndex& index, std::string_view query, std::size_t k,
                                const Scorer& scorer);
std::vector<ScoredChunk> search(const CorpusIndex& index, std::string_view query, std::size_t k);

}  // namespace ragrl::retrieval
