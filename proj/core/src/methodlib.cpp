// SPDX-License-Identifier: Apache-2.0
#include "biasaudit/methodlib.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "biasaudit/error.hpp"

namespace biasaudit::methodlib {

namespace {

using ojson = nlohmann::ordered_json;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool mentions(const std::string& haystack, std::string_view word) { return haystack.find(word) != std::string::npos; }

// Tags from the intention wording, e.g. "distribution bias in a categorical feature".
Tags derive_tags(const MethodEntry& e) {
  const auto text = lower(e.intention);
  Tags t;
  const bool distribution = mentions(text, "distribution");
  const bool correlation = mentions(text, "correlation") || mentions(text, "association");
  if (distribution == correlation) return t;
  t.bias_type = distribution ? "Distribution" : "Correlation";
  const bool categorical = mentions(text, "categorical");
  const bool numerical = mentions(text, "numerical") || mentions(text, "numeric ");
  if (distribution) {
    if (categorical != numerical) t.data_type = categorical ? "cat_dist" : "num_dist";
  } else if (categorical && numerical) {
    t.data_type = "cat_num";
  } else if (categorical) {
    t.data_type = "cat_cat";
  } else if (numerical) {
    t.data_type = "num_num";
  }
  t.domain = e.field;
  return t;
}

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(Errc::SchemaError, fmt::format("{}: {}", where, what));
}

void validate(const MethodEntry& e, const std::string& where) {
  if (e.id.empty()) schema_error(where, "missing id");
  if (e.intention.empty()) schema_error(where, "intention must be non-empty");
  if (e.tags.bias_type != "Distribution" && e.tags.bias_type != "Correlation") {
    schema_error(where, "tags.bias_type must be Distribution or Correlation");
  }
  const auto scenario = metrics::scenario_from_string(e.tags.data_type);
  if (!scenario) schema_error(where, fmt::format("tags.data_type '{}' is not a scenario tag", e.tags.data_type));
  if (metrics::is_distribution(*scenario) != (e.tags.bias_type == "Distribution")) {
    schema_error(where, "tags.bias_type contradicts tags.data_type");
  }
  if (e.tags.tool) {
    const auto metric = metrics::metric_from_tool(*e.tags.tool);
    if (!metric || metrics::scenario_of(*metric) != *scenario) {
      schema_error(where, fmt::format("tags.tool '{}' is not a detection tool of {}", *e.tags.tool, e.tags.data_type));
    }
  }
}

}  // namespace

MethodEntry entry_from_json(const ojson& j, std::size_t position) {
  std::string where = fmt::format("entry #{}", position);
  if (!j.is_object()) schema_error(where, "not an object");
  if (j.contains("id") && j["id"].is_string()) where = fmt::format("entry '{}'", j["id"].get<std::string>());
  MethodEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.intention = j.value("intention", "");
    if (j.contains("method")) {
      if (!j["method"].is_object()) schema_error(where, "method must be an object of ordered steps");
      for (const auto& [k, v] : j["method"].items()) e.method.emplace_back(k, v.get<std::string>());
    }
    e.title = j.value("title", "");
    e.article_link = j.value("article_link", "");
    e.field = j.value("field", "");
    e.year = j.value("year", 0);
    if (j.contains("tags")) {
      const auto& t = j["tags"];
      e.tags.bias_type = t.value("bias_type", "");
      e.tags.data_type = t.value("data_type", "");
      e.tags.domain = t.value("domain", "");
      if (t.contains("tool")) e.tags.tool = t["tool"].get<std::string>();
    } else {
      e.tags = derive_tags(e);
    }
  } catch (const nlohmann::json::exception& ex) {
    schema_error(where, ex.what());
  }
  validate(e, where);
  return e;
}

ojson entry_to_json(const MethodEntry& e) {
  ojson steps = ojson::object();
  for (const auto& [k, v] : e.method) steps[k] = v;
  ojson tags{{"bias_type", e.tags.bias_type}, {"data_type", e.tags.data_type}, {"domain", e.tags.domain}};
  if (e.tags.tool) tags["tool"] = *e.tags.tool;
  return ojson{{"id", e.id},       {"intention", e.intention},       {"method", steps},
               {"title", e.title}, {"article_link", e.article_link}, {"field", e.field},
               {"year", e.year},   {"tags", tags}};
}

Library::Library(std::vector<MethodEntry> entries, std::filesystem::path backing)
    : entries_(std::move(entries)), path_(std::move(backing)) {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.id).second) throw Error(Errc::SchemaError, fmt::format("duplicate id '{}'", e.id));
  }
}

Library load_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, fmt::format("cannot open method library '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  const auto text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return Library({}, path);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::SchemaError, fmt::format("{}: {}", path.string(), ex.what()));
  }
  if (!j.is_array()) throw Error(Errc::SchemaError, fmt::format("{}: expected a JSON array of entries", path.string()));
  std::vector<MethodEntry> entries;
  for (std::size_t i = 0; i < j.size(); ++i) entries.push_back(entry_from_json(j[i], i));
  return Library(std::move(entries), path);
}

void save_library(const Library& lib, const std::filesystem::path& path) {
  ojson j = ojson::array();
  for (const auto& e : lib.entries()) j.push_back(entry_to_json(e));
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, fmt::format("cannot write '{}'", tmp.string()));
    out << j.dump(2) << '\n';
    if (!out.flush()) throw Error(Errc::IoError, fmt::format("write to '{}' failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoError, fmt::format("cannot replace '{}': {}", path.string(), ec.message()));
}

std::vector<std::pair<std::string, std::string>> list_intentions(const Library& lib) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : lib.entries()) out.emplace_back(e.id, e.intention);
  return out;
}

const MethodEntry& get_method_by_id(const Library& lib, std::string_view id) {
  for (const auto& e : lib.entries()) {
    if (e.id == id) return e;
  }
  throw Error(Errc::UnknownId, fmt::format("no method with id '{}'", id));
}

Library add_entry(const Library& lib, MethodEntry entry) {
  if (entry.tags.bias_type.empty() && entry.tags.data_type.empty()) entry.tags = derive_tags(entry);
  validate(entry, fmt::format("entry '{}'", entry.id));
  for (const auto& e : lib.entries()) {
    if (e.id == entry.id) throw Error(Errc::DuplicateId, fmt::format("id '{}' already exists", entry.id));
  }
  auto entries = lib.entries();
  entries.push_back(std::move(entry));
  Library next(std::move(entries), lib.backing_file());
  if (!next.backing_file().empty()) save_library(next, next.backing_file());
  return next;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && seen.insert(cur).second) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

EmbeddingReranker::EmbeddingReranker(std::shared_ptr<net::HttpClient> client, std::string url, std::string model,
                                     std::string api_key)
    : client_(std::move(client)), url_(std::move(url)), model_(std::move(model)), key_(std::move(api_key)) {}

std::vector<double> EmbeddingReranker::score(const std::string& query, const std::vector<std::string>& candidates) {
  nlohmann::json inputs = nlohmann::json::array();
  inputs.push_back(query);
  for (const auto& c : candidates) inputs.push_back(c);
  net::HttpRequest req;
  req.url = url_;
  req.headers["Content-Type"] = "application/json";
  if (!key_.empty()) req.headers["Authorization"] = "Bearer " + key_;
  req.body = nlohmann::json{{"model", model_}, {"input", inputs}}.dump();
  const auto res = client_->post(req);
  if (res.status < 200 || res.status >= 300) {
    throw Error(Errc::NetworkError, fmt::format("embedding endpoint returned HTTP {}", res.status));
  }
  std::vector<std::vector<double>> vecs;
  try {
    const auto parsed = nlohmann::json::parse(res.body);
    for (const auto& d : parsed.at("data")) vecs.push_back(d.at("embedding").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::NetworkError, fmt::format("malformed embedding response: {}", ex.what()));
  }
  if (vecs.size() != candidates.size() + 1) throw Error(Errc::NetworkError, "embedding count mismatch");
  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return na > 0 && nb > 0 ? dot / std::sqrt(na * nb) : 0.0;
  };
  std::vector<double> out;
  for (std::size_t i = 1; i < vecs.size(); ++i) out.push_back(cosine(vecs[0], vecs[i]));
  return out;
}

std::vector<MethodEntry> retrieve(const Library& lib, const RetrievalQuery& q, Reranker* reranker) {
  if (q.top_k == 0) throw Error(Errc::InvalidArgument, "top_k must be >= 1");
  const auto tag = std::string(metrics::to_string(q.scenario));

  // Document frequencies over the whole library keep weights independent of the filter.
  std::map<std::string, std::size_t> df;
  std::vector<std::vector<std::string>> doc_tokens;
  for (const auto& e : lib.entries()) {
    doc_tokens.push_back(tokenize(e.intention));
    for (const auto& t : doc_tokens.back()) ++df[t];
  }
  const double n_docs = static_cast<double>(lib.size());
  auto idf = [&](const std::string& t) {
    auto it = df.find(t);
    const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
    return std::log(1.0 + (n_docs + 1.0) / (d + 1.0));
  };

  const auto query = tokenize(q.free_text);
  double query_weight = 0;
  for (const auto& t : query) query_weight += idf(t);

  struct Scored {
    const MethodEntry* entry;
    double score;
  };
  std::vector<Scored> hits;
  for (std::size_t i = 0; i < lib.entries().size(); ++i) {
    const auto& e = lib.entries()[i];
    if (e.tags.data_type != tag) continue;
    const std::set<std::string> doc(doc_tokens[i].begin(), doc_tokens[i].end());
    double overlap = 0;
    for (const auto& t : query) {
      if (doc.contains(t)) overlap += idf(t);
    }
    hits.push_back({&e, query_weight > 0 ? overlap / query_weight : 0.0});
  }
  auto order = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry->id < b.entry->id;
  };
  std::sort(hits.begin(), hits.end(), order);
  if (reranker && !hits.empty() && !q.free_text.empty()) {
    std::vector<std::string> texts;
    for (const auto& h : hits) texts.push_back(h.entry->intention);
    const auto scores = reranker->score(q.free_text, texts);
    if (scores.size() == hits.size()) {
      for (std::size_t i = 0; i < hits.size(); ++i) hits[i].score = scores[i];
      std::sort(hits.begin(), hits.end(), order);
    }
  }
  std::vector<MethodEntry> out;
  for (std::size_t i = 0; i < hits.size() && i < q.top_k; ++i) out.push_back(*hits[i].entry);
  return out;
}

}  // namespace biasaudit::methodlib
