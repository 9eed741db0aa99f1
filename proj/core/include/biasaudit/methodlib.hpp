// SPDX-License-Identifier: Apache-2.0
#pragma once

// The bias detection method library: annotated records of published
// detection procedures, with tag filtering and lexical retrieval.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biasaudit/metrics.hpp"
#include "biasaudit/net.hpp"

namespace biasaudit::methodlib {

struct Tags {
  /// "Distribution" or "Correlation".
  std::string bias_type;
  /// Scenario tag such as "cat_dist".
  std::string data_type;
  std::string domain;
  /// Detection tool that executes this method, when one exists. Entries
  /// without a tool are advisory: their steps are shown, never executed.
  std::optional<std::string> tool;

  friend bool operator==(const Tags&, const Tags&) = default;
};

struct MethodEntry {
  std::string id;
  std::string intention;
  /// Step name to step text, in order.
  std::vector<std::pair<std::string, std::string>> method;
  std::string title;
  std::string article_link;
  std::string field;
  /// 0 when the entry is not tied to one publication.
  int year = 0;
  Tags tags;

  bool advisory() const noexcept { return !tags.tool.has_value(); }
  friend bool operator==(const MethodEntry&, const MethodEntry&) = default;
};

/// Missing tags are derived from the intention text ("distribution" or
/// "correlation"; "categorical"/"numerical" feature words) and `field`.
/// Throws SchemaError naming the entry.
MethodEntry entry_from_json(const nlohmann::ordered_json& j, std::size_t position = 0);
nlohmann::ordered_json entry_to_json(const MethodEntry& e);

class Library {
 public:
  Library() = default;
  /// Throws SchemaError on a duplicate id.
  explicit Library(std::vector<MethodEntry> entries, std::filesystem::path backing = {});

  const std::vector<MethodEntry>& entries() const noexcept { return entries_; }
  const std::filesystem::path& backing_file() const noexcept { return path_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<MethodEntry> entries_;
  std::filesystem::path path_;
};

/// A JSON array of entries; an empty file is an empty library.
/// Errors: FileNotFound, SchemaError (with entry id or position).
Library load_library(const std::filesystem::path& path);
/// Atomic: writes a sibling temp file and renames it over `path`.
void save_library(const Library& lib, const std::filesystem::path& path);

/// (id, intention) in library order.
std::vector<std::pair<std::string, std::string>> list_intentions(const Library& lib);
/// Case-sensitive. Throws UnknownId.
const MethodEntry& get_method_by_id(const Library& lib, std::string_view id);

/// Validates and appends; when the library has a backing file the new
/// content is persisted before returning. Errors: DuplicateId, SchemaError.
Library add_entry(const Library& lib, MethodEntry entry);

struct RetrievalQuery {
  metrics::Scenario scenario = metrics::Scenario::CatDist;
  std::string free_text;
  std::size_t top_k = 5;
};

/// Optional second-stage ordering by embedding similarity.
class Reranker {
 public:
  virtual ~Reranker() = default;
  /// Returns one score per candidate; higher ranks first.
  virtual std::vector<double> score(const std::string& query, const std::vector<std::string>& candidates) = 0;
};

/// Calls an OpenAI-style /embeddings endpoint and scores by cosine similarity.
class EmbeddingReranker final : public Reranker {
 public:
  EmbeddingReranker(std::shared_ptr<net::HttpClient> client, std::string url, std::string model, std::string api_key);
  std::vector<double> score(const std::string& query, const std::vector<std::string>& candidates) override;

 private:
  std::shared_ptr<net::HttpClient> client_;
  std::string url_, model_, key_;
};

/// Lowercased alphanumeric tokens, de-duplicated, in first-seen order.
std::vector<std::string> tokenize(std::string_view text);

/// Keeps entries tagged with the query scenario and ranks them by
/// IDF-weighted token overlap between the query text and the intention,
/// normalized by the query's total weight; ties go to the smaller id.
/// Throws InvalidArgument when top_k is 0.
std::vector<MethodEntry> retrieve(const Library& lib, const RetrievalQuery& q, Reranker* reranker = nullptr);

}  // namespace biasaudit::methodlib
