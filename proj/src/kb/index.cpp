#include "ocuflow/kb/index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow::kb {

namespace {

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words{
      "a",   "an",  "and", "are", "as",   "at",   "be",   "by",  "for", "from", "has",
      "in",  "is",  "it",  "its", "of",   "on",   "or",   "the", "to",  "was",  "were",
      "with", "this", "that", "these", "those", "which", "can", "may", "be", "been"};
  return words;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  return words;
}

std::string join_words(const std::vector<std::string>& words, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::string chunk_id(const std::string& source_id, std::size_t chunk) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", chunk);
  return source_id + "#" + buf;
}

std::map<std::string, std::size_t> term_counts(const std::vector<std::string>& terms) {
  std::map<std::string, std::size_t> tf;
  for (const auto& t : terms) ++tf[t];
  return tf;
}

std::vector<std::string> unique_terms(std::vector<std::string> terms) {
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stopwords().contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Index Index::ingest(std::span<const SourceDocument> documents, ChunkOptions options) {
  if (options.window_words == 0 || options.overlap_words >= options.window_words) {
    throw Error(ErrorCode::InvalidArgument, "chunk overlap must be smaller than the window");
  }
  std::set<std::string> seen;
  for (const auto& doc : documents) {
    if (!seen.insert(doc.source_id).second) throw Error(ErrorCode::DuplicateSource, doc.source_id);
  }
  std::vector<const SourceDocument*> ordered;
  for (const auto& doc : documents) ordered.push_back(&doc);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->source_id < b->source_id; });

  Index index;
  index.options_ = options;
  const std::size_t stride = options.window_words - options.overlap_words;
  for (const auto* doc : ordered) {
    auto words = split_words(doc->text);
    if (words.empty()) throw Error(ErrorCode::EmptyDocument, doc->source_id);
    std::size_t chunk = 0;
    for (std::size_t start = 0;; start += stride) {
      std::size_t end = std::min(words.size(), start + options.window_words);
      index.passages_.push_back(
          {chunk_id(doc->source_id, chunk), doc->source_id, join_words(words, start, end), chunk, start});
      ++chunk;
      if (end == words.size()) break;
    }
  }
  index.build_statistics();
  return index;
}

Index Index::ingest_directory(const std::filesystem::path& dir, ChunkOptions options) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Io, "corpus directory not found: " + dir.string());
  }
  std::vector<SourceDocument> docs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    docs.push_back({entry.path().stem().string(), ss.str()});
  }
  return ingest(docs, options);
}

void Index::build_statistics() {
  term_freqs_.clear();
  lengths_.clear();
  doc_freq_.clear();
  std::size_t total = 0;
  for (const auto& p : passages_) {
    auto terms = tokenize(p.text);
    lengths_.push_back(terms.size());
    total += terms.size();
    auto tf = term_counts(terms);
    for (const auto& [term, _] : tf) ++doc_freq_[term];
    term_freqs_.push_back(std::move(tf));
  }
  avg_length_ = passages_.empty() ? 0.0 : static_cast<double>(total) / passages_.size();
}

double Index::idf(const std::string& term) const {
  auto it = doc_freq_.find(term);
  double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
  double n = static_cast<double>(passages_.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Index::score_terms(const std::map<std::string, std::size_t>& tf, std::size_t length,
                          const std::vector<std::string>& query_terms) const {
  double avg = avg_length_ > 0.0 ? avg_length_ : 1.0;
  double norm = kK1 * (1.0 - kB + kB * static_cast<double>(length) / avg);
  double score = 0.0;
  for (const auto& term : query_terms) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    double f = static_cast<double>(it->second);
    score += idf(term) * f * (kK1 + 1.0) / (f + norm);
  }
  return score;
}

std::vector<RetrievalHit> Index::retrieve(std::string_view query, std::size_t k) const {
  auto terms = unique_terms(tokenize(query));
  if (terms.empty()) throw Error(ErrorCode::EmptyQuery, std::string(query));
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  std::vector<RetrievalHit> hits;
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    double s = score_terms(term_freqs_[i], lengths_[i], terms);
    if (s > 0.0) hits.push_back({passages_[i], s, 0});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage.passage_id < b.passage.passage_id;
  });
  if (hits.size() > k) hits.resize(k);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
  return hits;
}

double Index::self_match_score(std::string_view text) const {
  auto terms = tokenize(text);
  return score_terms(term_counts(terms), terms.size(), unique_terms(terms));
}

double Index::score_floor(std::string_view claim, double fraction) const {
  return fraction * self_match_score(claim);
}

const Passage* Index::find(std::string_view passage_id) const {
  for (const auto& p : passages_) {
    if (p.passage_id == passage_id) return &p;
  }
  return nullptr;
}

Json Index::to_json() const {
  Json passages = Json::array();
  for (const auto& p : passages_) {
    passages.push_back(Json{{"passage_id", p.passage_id},
                            {"source_id", p.source_id},
                            {"chunk", p.chunk},
                            {"word_offset", p.word_offset},
                            {"text", p.text}});
  }
  return Json{{"format", "ocuflow-kb-index"},
              {"version", kFormatVersion},
              {"window_words", options_.window_words},
              {"overlap_words", options_.overlap_words},
              {"passages", std::move(passages)}};
}

Index Index::from_json(const Json& doc) {
  if (!doc.is_object() || doc.value("format", std::string()) != "ocuflow-kb-index") {
    throw Error(ErrorCode::SchemaViolation, "format");
  }
  if (doc.value("version", 0) != kFormatVersion) {
    throw Error(ErrorCode::UnsupportedSchemaVersion, doc.value("version", Json()).dump());
  }
  Index index;
  index.options_.window_words = doc.at("window_words").get<std::size_t>();
  index.options_.overlap_words = doc.at("overlap_words").get<std::size_t>();
  std::set<std::string> ids;
  for (const auto& p : doc.at("passages")) {
    Passage passage{p.at("passage_id").get<std::string>(), p.at("source_id").get<std::string>(),
                    p.at("text").get<std::string>(), p.at("chunk").get<std::size_t>(),
                    p.at("word_offset").get<std::size_t>()};
    if (passage.text.empty()) throw Error(ErrorCode::EmptyDocument, passage.passage_id);
    if (!ids.insert(passage.passage_id).second) {
      throw Error(ErrorCode::SchemaViolation, "duplicate passage " + passage.passage_id);
    }
    index.passages_.push_back(std::move(passage));
  }
  index.build_statistics();
  return index;
}

Index Index::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open index " + path.string());
  return from_json(Json::parse(in));
}

void Index::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write index " + path.string());
  out << to_json().dump() << "\n";
}

std::string Index::content_hash() const { return text::hex64(text::fnv1a64(to_json().dump())); }

GroundingResult ground(std::span<const RetrievalHit> hits, double floor) {
  GroundingResult result;
  for (const auto& hit : hits) {
    if (hit.score >= floor && hit.score > 0.0) {
      result.citations.push_back({hit.passage.source_id, hit.passage.passage_id});
    }
  }
  result.supported = !result.citations.empty();
  return result;
}

GroundingResult ground(const Index& index, std::string_view claim,
                       std::span<const RetrievalHit> hits, double fraction) {
  return ground(hits, index.score_floor(claim, fraction));
}

TransportResult KnowledgeBackend::call(const ToolDescriptor&, const Json& request,
                                       std::chrono::milliseconds) {
  if (!index_) return TransportResult::tool_error("knowledge index not loaded");
  const auto inputs = request.value("inputs", Json::object());
  auto query = inputs.value("text", std::string());
  std::size_t k = default_k_;
  if (inputs.contains("params") && inputs["params"].contains("k") &&
      inputs["params"]["k"].is_number_unsigned()) {
    k = std::max<std::size_t>(1, inputs["params"]["k"].get<std::size_t>());
  }
  try {
    auto hits = index_->retrieve(query, k);
    Json out_hits = Json::array();
    for (const auto& h : hits) {
      out_hits.push_back(Json{{"passage_id", h.passage.passage_id},
                              {"source_id", h.passage.source_id},
                              {"score", h.score},
                              {"rank", h.rank},
                              {"text", h.passage.text}});
    }
    return TransportResult::ok(Json{{"hits", std::move(out_hits)},
                                    {"score_floor", index_->score_floor(query)}},
                               0.0);
  } catch (const Error& e) {
    return TransportResult::tool_error(e.what());
  }
}

void register_knowledge_backend(BackendRegistry& registry, std::shared_ptr<const Index> index) {
  registry.register_backend("knowledge", [index](const AdapterBinding&) -> std::shared_ptr<Backend> {
    return std::make_shared<KnowledgeBackend>(index);
  });
}

}  // namespace ocuflow::kb
