#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocuflow/adapters/backend.hpp"
#include "ocuflow/core/json_io.hpp"
#include "ocuflow/core/model.hpp"

namespace ocuflow::kb {

struct SourceDocument {
  std::string source_id;
  std::string text;
};

struct Passage {
  std::string passage_id;  // "<source_id>#<chunk:04>"
  std::string source_id;
  std::string text;
  std::size_t chunk = 0;
  std::size_t word_offset = 0;
};

struct RetrievalHit {
  Passage passage;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

struct ChunkOptions {
  std::size_t window_words = 256;
  std::size_t overlap_words = 64;
};

inline constexpr double kScoreFloorFraction = 0.25;

// Lowercase alphanumeric terms with a short stopword list removed.
std::vector<std::string> tokenize(std::string_view text);

// Lexical index with BM25 scoring (term frequency saturation, inverse
// document frequency damping). Immutable after construction.
class Index {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;
  static constexpr int kFormatVersion = 1;

  // Throws DuplicateSource, EmptyDocument.
  static Index ingest(std::span<const SourceDocument> documents, ChunkOptions options = {});
  // Every regular file in `dir`; the file stem is the source_id.
  static Index ingest_directory(const std::filesystem::path& dir, ChunkOptions options = {});

  static Index from_json(const Json& doc);
  static Index load(const std::filesystem::path& path);
  Json to_json() const;
  void save(const std::filesystem::path& path) const;

  // Top-k positive-score passages, score descending then passage_id.
  // Throws EmptyQuery when the query has no terms.
  std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k) const;

  // Score of `text` against itself treated as a passage of this index.
  double self_match_score(std::string_view text) const;
  double score_floor(std::string_view claim, double fraction = kScoreFloorFraction) const;

  const std::vector<Passage>& passages() const noexcept { return passages_; }
  const Passage* find(std::string_view passage_id) const;
  const ChunkOptions& options() const noexcept { return options_; }
  std::string content_hash() const;

 private:
  void build_statistics();
  double score_terms(const std::map<std::string, std::size_t>& tf, std::size_t length,
                     const std::vector<std::string>& query_terms) const;
  double idf(const std::string& term) const;

  ChunkOptions options_;
  std::vector<Passage> passages_;
  std::vector<std::map<std::string, std::size_t>> term_freqs_;
  std::vector<std::size_t> lengths_;
  std::map<std::string, std::size_t> doc_freq_;
  double avg_length_ = 0.0;
};

struct GroundingResult {
  bool supported = false;
  std::vector<Citation> citations;
};

// Supported iff at least one hit scores >= floor (inclusive); citations are
// exactly those hits.
GroundingResult ground(std::span<const RetrievalHit> hits, double floor);
GroundingResult ground(const Index& index, std::string_view claim,
                       std::span<const RetrievalHit> hits,
                       double fraction = kScoreFloorFraction);

// Backend kind "knowledge": inputs {"text": query, "params": {"k": n}} ->
// {"hits": [{passage_id, source_id, score, rank, text}], "score_floor": x}.
class KnowledgeBackend : public Backend {
 public:
  explicit KnowledgeBackend(std::shared_ptr<const Index> index, std::size_t default_k = 3)
      : index_(std::move(index)), default_k_(default_k) {}
  TransportResult call(const ToolDescriptor& tool, const Json& request,
                       std::chrono::milliseconds deadline) override;

 private:
  std::shared_ptr<const Index> index_;
  std::size_t default_k_;
};

// Registers the "knowledge" kind; every binding of that kind shares `index`.
void register_knowledge_backend(BackendRegistry& registry, std::shared_ptr<const Index> index);

}  // namespace ocuflow::kb
