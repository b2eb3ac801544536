#pragma once

#include "novelty/http.hpp"

#include <nlohmann/json.hpp>

#include <compare>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Builds the per-target literature database: two-order citation metadata,
// co-occurrence ranking with capacity truncation, and full-text resolution.
namespace novelty::corpus {

inline constexpr std::size_t kDefaultCapacity = 200;

enum class Order { target, first, second };

std::string_view to_string(Order order);
Order order_from_string(std::string_view s);

// Calendar date with year, year-month or full precision. Missing components
// are zero, so "2023" sorts before "2023-01-01".
struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  static std::optional<Date> parse(std::string_view s);
  std::string to_string() const;

  auto operator<=>(const Date &) const = default;
};

struct PaperMeta {
  std::string id;
  std::string title;
  std::optional<Date> publication_date;
  Order order = Order::first;
  int cited_by_first_order = 0;
  std::optional<std::string> source_url;

  bool operator==(const PaperMeta &) const = default;
};

enum class IngestStatus { resolved, text_missing, extraction_failed };

std::string_view to_string(IngestStatus status);
IngestStatus ingest_status_from_string(std::string_view s);

struct Document {
  PaperMeta meta;
  std::string raw_text;
  std::string cleaned_text;
  IngestStatus ingest_status = IngestStatus::text_missing;
};

struct CorpusManifest {
  std::string target_id;
  PaperMeta target;
  std::vector<PaperMeta> entries;
  std::size_t capacity = kDefaultCapacity;
};

struct ReferenceSet {
  std::vector<PaperMeta> first_order;
  std::vector<PaperMeta> second_order;
};

class ScholarlyProvider {
public:
  virtual ~ScholarlyProvider() = default;
  // Title or provider id to metadata. Throws TargetNotFound / ProviderUnavailable.
  virtual PaperMeta resolve(std::string_view title_or_id) = 0;
  // Direct references of `paper`, in provider order.
  virtual std::vector<PaperMeta> references(const PaperMeta &paper) = 0;
};

struct TextFetch {
  IngestStatus status = IngestStatus::text_missing;
  std::string raw_text;
  std::string detail;
};

class TextSource {
public:
  virtual ~TextSource() = default;
  virtual TextFetch fetch(const PaperMeta &paper) = 0;
};

// Reads <dir>/metadata.json: {"papers": [{"id", "title", "date", "source_url",
// "references": [id, ...]}]}. Reference ids absent from the table are
// returned with the id as title.
class OfflineScholarlyProvider final : public ScholarlyProvider {
public:
  explicit OfflineScholarlyProvider(const std::filesystem::path &dir);

  PaperMeta resolve(std::string_view title_or_id) override;
  std::vector<PaperMeta> references(const PaperMeta &paper) override;

private:
  struct Entry {
    PaperMeta meta;
    std::vector<std::string> references;
  };
  std::vector<Entry> papers_;
  const Entry *find(std::string_view id) const;
};

// Semantic-Scholar-style graph API:
//   GET {base}/paper/{id}?fields=...
//   GET {base}/paper/search?query=...&limit=1&fields=...
//   GET {base}/paper/{id}/references?fields=...&limit=N
class HttpScholarlyProvider final : public ScholarlyProvider {
public:
  HttpScholarlyProvider(std::string base_url, std::shared_ptr<http::Client> client,
                        std::string api_key = {}, int max_attempts = 3);

  PaperMeta resolve(std::string_view title_or_id) override;
  std::vector<PaperMeta> references(const PaperMeta &paper) override;

private:
  nlohmann::json get_json(const std::string &path_and_query, bool not_found_is_empty);

  std::string base_url_;
  std::shared_ptr<http::Client> client_;
  std::string api_key_;
  int max_attempts_;
};

// Looks up <dir>/<id>.json (an ingestion record carrying raw_text) and then
// <dir>/<id>.txt, with the id passed through text::safe_filename.
class DirectoryTextSource final : public TextSource {
public:
  explicit DirectoryTextSource(std::filesystem::path dir);
  TextFetch fetch(const PaperMeta &paper) override;

private:
  std::filesystem::path dir_;
};

// Two-order reference set. A paper in both orders is kept only as first-order;
// the target is excluded from both. Second-order papers carry the number of
// distinct first-order papers citing them and keep first-seen fetch order.
ReferenceSet fetch_reference_set(const PaperMeta &target, ScholarlyProvider &provider);

// Every first-order entry, then second-order entries ordered by
// (cited_by_first_order desc, date desc, absent dates last, fetch order)
// until `capacity` entries.
CorpusManifest rank_and_truncate(const PaperMeta &target, std::vector<PaperMeta> first_order,
                                 std::vector<PaperMeta> second_order, std::size_t capacity);

// Strict-weak ordering used for second-order ranking (fetch order is the
// caller's stable-sort tie-break).
bool ranks_before(const PaperMeta &a, const PaperMeta &b);

Document resolve_document(const PaperMeta &meta, TextSource &source);

// One Document per manifest entry, in manifest order. Failures are recorded
// in ingest_status and never abort the batch.
std::vector<Document> resolve_full_texts(const CorpusManifest &manifest, TextSource &source,
                                         std::size_t parallelism = 4);

// Maps manifest documents to the display names used in citation markers and
// the references section ("REF_007_<title>.pdf").
class DocumentCatalog {
public:
  DocumentCatalog() = default;
  DocumentCatalog(const CorpusManifest &manifest, std::vector<Document> documents);

  const std::vector<Document> &documents() const { return documents_; }
  const Document *by_id(std::string_view id) const;
  // Exact name first, then whitespace/case-insensitive match.
  const Document *by_name(std::string_view name) const;
  std::string name_of(std::string_view id) const;
  // Resolved, non-target documents eligible for indexing.
  std::vector<const Document *> indexable() const;

private:
  std::vector<Document> documents_;
  std::vector<std::string> names_;
};

std::string document_name(std::size_t position, const PaperMeta &meta);

// --- persistence -----------------------------------------------------------

nlohmann::json to_json(const PaperMeta &meta);
PaperMeta meta_from_json(const nlohmann::json &j);
nlohmann::json to_json(const Document &doc);
Document document_from_json(const nlohmann::json &j);
nlohmann::json to_json(const CorpusManifest &manifest);
CorpusManifest manifest_from_json(const nlohmann::json &j);

// corpus/manifest.json plus corpus/documents/<id>.json for target and entries.
void save_corpus(const std::filesystem::path &corpus_dir, const CorpusManifest &manifest,
                 const Document &target, const std::vector<Document> &documents);

struct LoadedCorpus {
  CorpusManifest manifest;
  Document target;
  std::vector<Document> documents;
};

LoadedCorpus load_corpus(const std::filesystem::path &corpus_dir);

} // namespace novelty::corpus
