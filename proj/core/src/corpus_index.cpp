// SPDX-License-Identifier: Apache-2.0
#include "ragrl/corpus_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "ragrl/error.hpp"
#include "ragrl/json_io.hpp"
#include "ragrl/text.hpp"

namespace ragrl::retrieval {

namespace {

CorpusChunk chunk_from_json(const nlohmann::json& j) {
  try {
    CorpusChunk c;
    c.doc_id = j.at("doc_id").get<std::string>();
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.source_title = j.value("title", std::string());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("corpus record: ") + e.what());
  }
}

nlohmann::json chunk_to_json(const CorpusChunk& c) {
  return {{"doc_id", c.doc_id}, {"chunk_id", c.chunk_id}, {"title", c.source_title}, {"text", c.text}};
}

}  // namespace

std::vector<CorpusChunk> read_corpus_jsonl(const std::filesystem::path& path) {
  std::vector<CorpusChunk> out;
  for (const auto& j : json_io::read_jsonl(path)) out.push_back(chunk_from_json(j));
  return out;
}

std::vector<CorpusChunk> chunk_document(const std::string& doc_id, const std::string& title,
                                        std::string_view body, std::size_t max_words) {
  if (max_words == 0) throw Error(ErrorKind::InvalidArgument, "max_words must be > 0");
  auto words = text::split_whitespace(body);
  std::vector<CorpusChunk> out;
  for (std::size_t start = 0, n = 0; start < words.size(); start += max_words, ++n) {
    std::string passage;
    for (std::size_t i = start; i < std::min(words.size(), start + max_words); ++i) {
      if (!passage.empty()) passage += ' ';
      passage += words[i];
    }
    out.push_back({doc_id, doc_id + "#" + std::to_string(n), std::move(passage), title});
  }
  return out;
}

CorpusIndex CorpusIndex::build(std::vector<CorpusChunk> chunks, Bm25Params params) {
  if (chunks.empty()) throw Error(ErrorKind::EmptyCorpus, "no chunks to index");
  std::set<std::string_view> seen;
  for (const auto& c : chunks) {
    if (!seen.insert(c.chunk_id).second)
      throw Error(ErrorKind::DuplicateChunkId, "chunk id '" + c.chunk_id + "' appears twice");
    auto words = text::word_count(c.text);
    if (words == 0) throw Error(ErrorKind::InvalidArgument, "chunk '" + c.chunk_id + "' is empty");
    if (words > kMaxChunkWords)
      throw Error(ErrorKind::InvalidArgument,
                  "chunk '" + c.chunk_id + "' has " + std::to_string(words) + " words");
  }

  CorpusIndex idx;
  idx.params_ = params;
  idx.chunks_ = std::move(chunks);
  const auto n = idx.chunks_.size();
  idx.lengths_.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::string, std::uint32_t> tf;
    auto terms = text::lexical_terms(idx.chunks_[i].text);
    for (auto& t : terms) ++tf[std::move(t)];
    idx.lengths_[i] = static_cast<std::uint32_t>(terms.size());
    total += static_cast<double>(terms.size());
    for (const auto& [term, count] : tf)
      idx.postings_[term].push_back({static_cast<std::uint32_t>(i), count});
  }
  idx.avg_length_ = total / static_cast<double>(n);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return idx.chunks_[a].chunk_id < idx.chunks_[b].chunk_id;
  });
  idx.id_rank_.resize(n);
  for (std::uint32_t r = 0; r < n; ++r) idx.id_rank_[order[r]] = r;
  return idx;
}

std::span<const Posting> CorpusIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return {};
  return it->second;
}

void CorpusIndex::save(const std::filesystem::path& path) const {
  std::vector<nlohmann::json> records;
  records.reserve(chunks_.size() + 1);
  records.push_back({{"format", "ragrl-corpus-index"}, {"version", 1},
                     {"k1", params_.k1}, {"b", params_.b}});
  for (const auto& c : chunks_) records.push_back(chunk_to_json(c));
  json_io::write_jsonl(path, records);
}

CorpusIndex CorpusIndex::load(const std::filesystem::path& path) {
  auto records = json_io::read_jsonl(path);
  if (records.empty() || records.front().value("format", "") != "ragrl-corpus-index")
    throw Error(ErrorKind::SchemaMismatch, path.string() + " is not a saved corpus index");
  Bm25Params params{records.front().at("k1").get<double>(), records.front().at("b").get<double>()};
  std::vector<CorpusChunk> chunks;
  for (std::size_t i = 1; i < records.size(); ++i) chunks.push_back(chunk_from_json(records[i]));
  return build(std::move(chunks), params);
}

std::vector<double> Bm25Scorer::score_all(const CorpusIndex& index, std::string_view query) const {
  std::vector<double> scores(index.size(), 0.0);
  auto terms = text::lexical_terms(query);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  const double n = static_cast<double>(index.size());
  const auto& p = index.params();
  for (const auto& term : terms) {
    auto postings = index.postings(term);
    if (postings.empty()) continue;
    const double df = static_cast<double>(postings.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& post : postings) {
      const double tf = post.tf;
      const double norm = 1.0 - p.b + p.b * index.length(post.chunk) / index.average_length();
      scores[post.chunk] += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * norm);
    }
  }
  return scores;
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::string model, std::string api_key)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)) {}

std::vector<std::vector<float>> RemoteEmbedder::embed(const std::vector<std::string>& texts) {
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  nlohmann::json body = {{"input", texts}};
  if (!model_.empty()) body["model"] = model_;
  auto reply = detail::post_json(endpoint_, body, headers, 2, 60.0, ErrorKind::RetrievalUnavailable);
  std::vector<std::vector<float>> out;
  try {
    for (const auto& d : reply.at("data")) out.push_back(d.at("embedding").get<std::vector<float>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("embedding reply: ") + e.what());
  }
  if (out.size() != texts.size())
    throw Error(ErrorKind::SchemaMismatch, "embedding reply has the wrong number of vectors");
  return out;
}

namespace {

void normalize(std::vector<float>& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace

DenseScorer::DenseScorer(std::shared_ptr<Embedder> embedder, const CorpusIndex& index,
                         std::size_t batch_size)
    : embedder_(std::move(embedder)) {
  if (batch_size == 0) batch_size = 1;
  chunk_vectors_.reserve(index.size());
  for (std::size_t start = 0; start < index.size(); start += batch_size) {
    std::vector<std::string> batch;
    for (std::size_t i = start; i < std::min(index.size(), start + batch_size); ++i)
      batch.push_back(index.chunk(i).text);
    for (auto& v : embedder_->embed(batch)) {
      normalize(v);
      chunk_vectors_.push_back(std::move(v));
    }
  }
}

std::vector<double> DenseScorer::score_all(const CorpusIndex& index, std::string_view query) const {
  if (index.size() != chunk_vectors_.size())
    throw Error(ErrorKind::InvalidArgument, "dense scorer was built for a different index");
  auto q = embedder_->embed({std::string(query)}).at(0);
  normalize(q);
  std::vector<double> scores(index.size(), 0.0);
  for (std::size_t i = 0; i < chunk_vectors_.size(); ++i) {
    const auto& v = chunk_vectors_[i];
    double dot = 0.0;
    for (std::size_t d = 0; d < std::min(v.size(), q.size()); ++d) dot += static_cast<double>(v[d]) * q[d];
    scores[i] = dot;
  }
  return scores;
}

std::vector<ScoredChunk> search(const CorpusIndex& index, std::string_view query, std::size_t k,
                                const Scorer& scorer) {
  if (text::trim(query).empty()) throw Error(ErrorKind::EmptyQuery, "query is blank");
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  auto scores = scorer.score_all(index, query);
  std::vector<std::uint32_t> order(index.size());
  std::iota(order.begin(), order.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.id_rank(a) < index.id_rank(b);
  };
  const auto take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  std::vector<ScoredChunk> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({index.chunk(order[i]), scores[order[i]]});
  return out;
}

std::vector<ScoredChunk> search(const CorpusIndex& index, std::string_view query, std::size_t k) {
  static const Bm25Scorer kDefault;
  return search(index, query, k, kDefault);
}

}  // namespace ragrl::retrieval
