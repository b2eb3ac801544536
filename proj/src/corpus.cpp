#include "novelty/corpus.hpp"

#include "novelty/error.hpp"
#include "novelty/ingest.hpp"
#include "novelty/parallel.hpp"
#include "novelty/text.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <thread>
#include <unordered_map>

namespace novelty::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Order order) {
  switch (order) {
  case Order::target: return "target";
  case Order::first: return "first";
  case Order::second: return "second";
  }
  return "first";
}

Order order_from_string(std::string_view s) {
  if (s == "target") return Order::target;
  if (s == "first") return Order::first;
  if (s == "second") return Order::second;
  fail(ErrorKind::InvalidInput, "unknown order: " + std::string(s));
}

std::string_view to_string(IngestStatus status) {
  switch (status) {
  case IngestStatus::resolved: return "resolved";
  case IngestStatus::text_missing: return "text_missing";
  case IngestStatus::extraction_failed: return "extraction_failed";
  }
  return "text_missing";
}

IngestStatus ingest_status_from_string(std::string_view s) {
  if (s == "resolved") return IngestStatus::resolved;
  if (s == "text_missing") return IngestStatus::text_missing;
  if (s == "extraction_failed") return IngestStatus::extraction_failed;
  fail(ErrorKind::InvalidInput, "unknown ingest_status: " + std::string(s));
}

// --- Date --------------------------------------------------------------------

std::optional<Date> Date::parse(std::string_view s) {
  const std::string t = text::trim(s);
  if (t.empty()) {
    return std::nullopt;
  }
  Date d;
  int *fields[] = {&d.year, &d.month, &d.day};
  std::size_t pos = 0;
  for (int i = 0; i < 3 && pos <= t.size(); ++i) {
    const std::size_t dash = t.find('-', pos);
    const std::string_view part =
        std::string_view(t).substr(pos, dash == std::string::npos ? std::string::npos : dash - pos);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty()) {
      return std::nullopt;
    }
    *fields[i] = value;
    if (dash == std::string::npos) {
      break;
    }
    pos = dash + 1;
  }
  if (d.year <= 0 || d.month < 0 || d.month > 12 || d.day < 0 || d.day > 31 ||
      (d.month == 0 && d.day != 0)) {
    return std::nullopt;
  }
  return d;
}

std::string Date::to_string() const {
  char buf[32];
  if (month == 0) {
    std::snprintf(buf, sizeof buf, "%04d", year);
  } else if (day == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  }
  return buf;
}

// --- duplicate detection ------------------------------------------------------

namespace {

// Ids decide when both sides have one; otherwise case-folded titles do.
class PaperIndex {
public:
  std::optional<std::size_t> find(const PaperMeta &p) const {
    if (!p.id.empty()) {
      if (auto it = by_id_.find(p.id); it != by_id_.end()) {
        return it->second;
      }
    }
    const std::string key = text::fold_title(p.title);
    if (key.empty()) {
      return std::nullopt;
    }
    if (auto it = by_title_.find(key); it != by_title_.end()) {
      for (const auto &[slot, has_id] : it->second) {
        if (p.id.empty() || !has_id) {
          return slot;
        }
      }
    }
    return std::nullopt;
  }

  void add(const PaperMeta &p, std::size_t slot) {
    if (!p.id.empty()) {
      by_id_.emplace(p.id, slot);
    }
    const std::string key = text::fold_title(p.title);
    if (!key.empty()) {
      by_title_[key].emplace_back(slot, !p.id.empty());
    }
  }

private:
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, bool>>> by_title_;
};

bool same_paper(const PaperMeta &a, const PaperMeta &b) {
  if (!a.id.empty() && !b.id.empty()) {
    return a.id == b.id;
  }
  const std::string ta = text::fold_title(a.title);
  return !ta.empty() && ta == text::fold_title(b.title);
}

} // namespace

ReferenceSet fetch_reference_set(const PaperMeta &target, ScholarlyProvider &provider) {
  ReferenceSet out;
  PaperIndex first_index;

  for (PaperMeta ref : provider.references(target)) {
    if (same_paper(ref, target) || first_index.find(ref)) {
      continue;
    }
    ref.order = Order::first;
    ref.cited_by_first_order = 0;
    first_index.add(ref, out.first_order.size());
    out.first_order.push_back(std::move(ref));
  }

  PaperIndex second_index;
  for (const PaperMeta &first : out.first_order) {
    // A first-order paper listing the same reference twice counts once.
    std::vector<std::size_t> counted;
    for (PaperMeta ref : provider.references(first)) {
      if (same_paper(ref, target) || first_index.find(ref)) {
        continue;
      }
      if (auto slot = second_index.find(ref)) {
        if (std::find(counted.begin(), counted.end(), *slot) == counted.end()) {
          ++out.second_order[*slot].cited_by_first_order;
          counted.push_back(*slot);
        }
        continue;
      }
      ref.order = Order::second;
      ref.cited_by_first_order = 1;
      const std::size_t slot = out.second_order.size();
      second_index.add(ref, slot);
      counted.push_back(slot);
      out.second_order.push_back(std::move(ref));
    }
  }
  return out;
}

bool ranks_before(const PaperMeta &a, const PaperMeta &b) {
  if (a.cited_by_first_order != b.cited_by_first_order) {
    return a.cited_by_first_order > b.cited_by_first_order;
  }
  if (a.publication_date.has_value() != b.publication_date.has_value()) {
    return a.publication_date.has_value();
  }
  if (a.publication_date && *a.publication_date != *b.publication_date) {
    return *a.publication_date > *b.publication_date;
  }
  return false;
}

CorpusManifest rank_and_truncate(const PaperMeta &target, std::vector<PaperMeta> first_order,
                                 std::vector<PaperMeta> second_order, std::size_t capacity) {
  if (capacity < first_order.size()) {
    fail(ErrorKind::CapacityTooSmall, "capacity " + std::to_string(capacity) + " < " +
                                          std::to_string(first_order.size()) +
                                          " first-order references");
  }
  CorpusManifest manifest;
  manifest.target = target;
  manifest.target.order = Order::target;
  manifest.target.cited_by_first_order = 0;
  manifest.target_id = target.id;
  manifest.capacity = capacity;

  std::stable_sort(second_order.begin(), second_order.end(), ranks_before);
  const std::size_t room = capacity - first_order.size();
  if (second_order.size() > room) {
    second_order.resize(room);
  }
  manifest.entries = std::move(first_order);
  manifest.entries.insert(manifest.entries.end(), std::make_move_iterator(second_order.begin()),
                          std::make_move_iterator(second_order.end()));
  return manifest;
}

// --- text resolution ------------------------------------------------------------

Document resolve_document(const PaperMeta &meta, TextSource &source) {
  Document doc;
  doc.meta = meta;
  TextFetch fetched;
  try {
    fetched = source.fetch(meta);
  } catch (const std::exception &e) {
    fetched.status = IngestStatus::extraction_failed;
    fetched.detail = e.what();
  }
  doc.raw_text = std::move(fetched.raw_text);
  doc.ingest_status = fetched.status;
  if (doc.ingest_status == IngestStatus::resolved) {
    doc.cleaned_text = ingest::clean_text(doc.raw_text);
    if (text::trim(doc.cleaned_text).empty()) {
      doc.ingest_status = IngestStatus::extraction_failed;
    }
  }
  return doc;
}

std::vector<Document> resolve_full_texts(const CorpusManifest &manifest, TextSource &source,
                                         std::size_t parallelism) {
  std::vector<Document> docs(manifest.entries.size());
  parallel_for(docs.size(), parallelism,
               [&](std::size_t i) { docs[i] = resolve_document(manifest.entries[i], source); });
  return docs;
}

// --- providers -------------------------------------------------------------------

namespace {

std::optional<Date> date_field(const json &j, const char *key) {
  if (!j.contains(key) || !j[key].is_string()) {
    return std::nullopt;
  }
  return Date::parse(j[key].get<std::string>());
}

std::string string_field(const json &j, const char *key) {
  if (j.contains(key) && j[key].is_string()) {
    return j[key].get<std::string>();
  }
  return {};
}

} // namespace

OfflineScholarlyProvider::OfflineScholarlyProvider(const fs::path &dir) {
  const fs::path path = dir / "metadata.json";
  json root;
  try {
    root = json::parse(text::read_file(path));
  } catch (const json::exception &e) {
    fail(ErrorKind::ProviderUnavailable, "invalid " + path.string() + ": " + e.what());
  } catch (const Error &e) {
    fail(ErrorKind::ProviderUnavailable, e.what());
  }
  for (const auto &p : root.at("papers")) {
    Entry e;
    e.meta.id = string_field(p, "id");
    e.meta.title = string_field(p, "title");
    e.meta.publication_date = date_field(p, "date");
    if (p.contains("source_url") && p["source_url"].is_string()) {
      e.meta.source_url = p["source_url"].get<std::string>();
    }
    if (p.contains("references")) {
      for (const auto &r : p["references"]) {
        e.references.push_back(r.get<std::string>());
      }
    }
    papers_.push_back(std::move(e));
  }
}

const OfflineScholarlyProvider::Entry *OfflineScholarlyProvider::find(std::string_view id) const {
  for (const auto &e : papers_) {
    if (e.meta.id == id) {
      return &e;
    }
  }
  return nullptr;
}

PaperMeta OfflineScholarlyProvider::resolve(std::string_view title_or_id) {
  if (const Entry *e = find(title_or_id)) {
    return e->meta;
  }
  const std::string folded = text::fold_title(title_or_id);
  for (const auto &e : papers_) {
    if (text::fold_title(e.meta.title) == folded) {
      return e.meta;
    }
  }
  fail(ErrorKind::TargetNotFound, "no paper matches '" + std::string(title_or_id) + "'");
}

std::vector<PaperMeta> OfflineScholarlyProvider::references(const PaperMeta &paper) {
  const Entry *e = find(paper.id);
  if (e == nullptr) {
    return {};
  }
  std::vector<PaperMeta> out;
  for (const auto &ref_id : e->references) {
    if (const Entry *r = find(ref_id)) {
      out.push_back(r->meta);
    } else {
      PaperMeta m;
      m.id = ref_id;
      m.title = ref_id;
      out.push_back(std::move(m));
    }
  }
  return out;
}

namespace {

constexpr const char *kS2Fields = "paperId,title,publicationDate,year,url";

PaperMeta meta_from_s2(const json &p) {
  PaperMeta m;
  m.id = string_field(p, "paperId");
  m.title = string_field(p, "title");
  m.publication_date = date_field(p, "publicationDate");
  if (!m.publication_date && p.contains("year") && p["year"].is_number_integer()) {
    m.publication_date = Date{p["year"].get<int>(), 0, 0};
  }
  if (auto url = string_field(p, "url"); !url.empty()) {
    m.source_url = url;
  }
  return m;
}

bool looks_like_id(std::string_view s) {
  return !s.empty() && s.find(' ') == std::string_view::npos;
}

} // namespace

HttpScholarlyProvider::HttpScholarlyProvider(std::string base_url,
                                             std::shared_ptr<http::Client> client,
                                             std::string api_key, int max_attempts)
    : base_url_(std::move(base_url)), client_(std::move(client)), api_key_(std::move(api_key)),
      max_attempts_(std::max(1, max_attempts)) {
  while (!base_url_.empty() && base_url_.back() == '/') {
    base_url_.pop_back();
  }
}

json HttpScholarlyProvider::get_json(const std::string &path_and_query, bool not_found_is_empty) {
  http::Headers headers;
  if (!api_key_.empty()) {
    headers["x-api-key"] = api_key_;
  }
  http::Response resp;
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    resp = client_->get(base_url_ + path_and_query, headers);
    if (!resp.transient()) {
      break;
    }
    if (attempt + 1 < max_attempts_) {
      std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
    }
  }
  if (resp.status == 404 && not_found_is_empty) {
    return json();
  }
  if (!resp.ok()) {
    fail(ErrorKind::ProviderUnavailable,
         "GET " + path_and_query + " -> " +
             (resp.status == 0 ? resp.error : std::to_string(resp.status)));
  }
  try {
    return json::parse(resp.body);
  } catch (const json::exception &e) {
    fail(ErrorKind::ProviderUnavailable, "invalid JSON from scholarly provider: " + std::string(e.what()));
  }
}

PaperMeta HttpScholarlyProvider::resolve(std::string_view title_or_id) {
  const std::string query(title_or_id);
  if (looks_like_id(query)) {
    json p = get_json("/paper/" + http::url_encode(query) + "?fields=" + kS2Fields, true);
    if (p.is_object() && !string_field(p, "paperId").empty()) {
      return meta_from_s2(p);
    }
  }
  json found = get_json("/paper/search?query=" + http::url_encode(query) +
                            "&limit=1&fields=" + kS2Fields,
                        true);
  if (found.is_object() && found.contains("data") && found["data"].is_array() &&
      !found["data"].empty()) {
    return meta_from_s2(found["data"][0]);
  }
  fail(ErrorKind::TargetNotFound, "no paper matches '" + query + "'");
}

std::vector<PaperMeta> HttpScholarlyProvider::references(const PaperMeta &paper) {
  if (paper.id.empty()) {
    return {};
  }
  json page = get_json("/paper/" + http::url_encode(paper.id) + "/references?fields=" +
                           kS2Fields + "&limit=1000",
                       true);
  std::vector<PaperMeta> out;
  if (!page.is_object() || !page.contains("data") || !page["data"].is_array()) {
    return out;
  }
  for (const auto &item : page["data"]) {
    if (!item.contains("citedPaper") || !item["citedPaper"].is_object()) {
      continue;
    }
    PaperMeta m = meta_from_s2(item["citedPaper"]);
    if (m.id.empty() && text::trim(m.title).empty()) {
      continue;
    }
    out.push_back(std::move(m));
  }
  return out;
}

DirectoryTextSource::DirectoryTextSource(fs::path dir) : dir_(std::move(dir)) {}

TextFetch DirectoryTextSource::fetch(const PaperMeta &paper) {
  TextFetch out;
  const std::string stem = text::safe_filename(paper.id);
  const fs::path record = dir_ / (stem + ".json");
  const fs::path plain = dir_ / (stem + ".txt");
  try {
    if (fs::exists(record)) {
      const json j = json::parse(text::read_file(record));
      out.raw_text = string_field(j, "raw_text");
    } else if (fs::exists(plain)) {
      out.raw_text = text::read_file(plain);
    } else {
      out.status = IngestStatus::text_missing;
      out.detail = "no text for " + paper.id;
      return out;
    }
  } catch (const std::exception &e) {
    out.status = IngestStatus::extraction_failed;
    out.detail = e.what();
    out.raw_text.clear();
    return out;
  }
  out.status = text::trim(out.raw_text).empty() ? IngestStatus::extraction_failed
                                                : IngestStatus::resolved;
  return out;
}

// --- catalog ----------------------------------------------------------------------

std::string document_name(std::size_t position, const PaperMeta &meta) {
  std::string title = text::normalize_whitespace(meta.title.empty() ? meta.id : meta.title);
  for (char &c : title) {
    if (c == '#' || c == '$' || c == '/' || c == '\\' || c == '[' || c == ']') {
      c = '_';
    }
  }
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "REF_%03zu_", position);
  return prefix + title + ".pdf";
}

DocumentCatalog::DocumentCatalog(const CorpusManifest &manifest, std::vector<Document> documents)
    : documents_(std::move(documents)) {
  names_.reserve(documents_.size());
  for (const auto &doc : documents_) {
    std::size_t position = 0;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      if (manifest.entries[i].id == doc.meta.id) {
        position = i + 1;
        break;
      }
    }
    names_.push_back(document_name(position, doc.meta));
  }
}

const Document *DocumentCatalog::by_id(std::string_view id) const {
  for (const auto &doc : documents_) {
    if (doc.meta.id == id) {
      return &doc;
    }
  }
  return nullptr;
}

const Document *DocumentCatalog::by_name(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      return &documents_[i];
    }
  }
  const std::string folded = text::fold_title(name);
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (text::fold_title(names_[i]) == folded) {
      return &documents_[i];
    }
  }
  return nullptr;
}

std::string DocumentCatalog::name_of(std::string_view id) const {
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (documents_[i].meta.id == id) {
      return names_[i];
    }
  }
  return std::string(id);
}

std::vector<const Document *> DocumentCatalog::indexable() const {
  std::vector<const Document *> out;
  for (const auto &doc : documents_) {
    if (doc.ingest_status == IngestStatus::resolved && doc.meta.order != Order::target) {
      out.push_back(&doc);
    }
  }
  return out;
}

// --- persistence -------------------------------------------------------------------

json to_json(const PaperMeta &meta) {
  json j;
  j["id"] = meta.id;
  j["title"] = meta.title;
  j["date"] = meta.publication_date ? json(meta.publication_date->to_string()) : json(nullptr);
  j["order"] = to_string(meta.order);
  j["cited_by_first_order"] = meta.cited_by_first_order;
  if (meta.source_url) {
    j["source_url"] = *meta.source_url;
  }
  return j;
}

PaperMeta meta_from_json(const json &j) {
  PaperMeta m;
  m.id = j.at("id").get<std::string>();
  m.title = string_field(j, "title");
  m.publication_date = date_field(j, "date");
  m.order = order_from_string(j.value("order", "first"));
  m.cited_by_first_order = j.value("cited_by_first_order", 0);
  if (j.contains("source_url") && j["source_url"].is_string()) {
    m.source_url = j["source_url"].get<std::string>();
  }
  return m;
}

json to_json(const Document &doc) {
  json j = to_json(doc.meta);
  j["raw_text"] = doc.raw_text;
  j["cleaned_text"] = doc.cleaned_text;
  j["ingest_status"] = to_string(doc.ingest_status);
  return j;
}

Document document_from_json(const json &j) {
  Document d;
  d.meta = meta_from_json(j);
  d.raw_text = string_field(j, "raw_text");
  d.cleaned_text = string_field(j, "cleaned_text");
  d.ingest_status = ingest_status_from_string(j.value("ingest_status", "text_missing"));
  return d;
}

json to_json(const CorpusManifest &manifest) {
  json j;
  j["target_id"] = manifest.target_id;
  j["capacity"] = manifest.capacity;
  j["target"] = to_json(manifest.target);
  j["entries"] = json::array();
  for (const auto &e : manifest.entries) {
    j["entries"].push_back(to_json(e));
  }
  return j;
}

CorpusManifest manifest_from_json(const json &j) {
  CorpusManifest m;
  m.target_id = j.at("target_id").get<std::string>();
  m.capacity = j.at("capacity").get<std::size_t>();
  m.target = meta_from_json(j.at("target"));
  for (const auto &e : j.at("entries")) {
    m.entries.push_back(meta_from_json(e));
  }
  return m;
}

void save_corpus(const fs::path &corpus_dir, const CorpusManifest &manifest, const Document &target,
                 const std::vector<Document> &documents) {
  text::write_file(corpus_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  const fs::path docs_dir = corpus_dir / "documents";
  text::write_file(docs_dir / (text::safe_filename(target.meta.id) + ".json"),
                   to_json(target).dump(2) + "\n");
  for (const auto &doc : documents) {
    text::write_file(docs_dir / (text::safe_filename(doc.meta.id) + ".json"),
                     to_json(doc).dump(2) + "\n");
  }
}

LoadedCorpus load_corpus(const fs::path &corpus_dir) {
  LoadedCorpus out;
  try {
    out.manifest = manifest_from_json(json::parse(text::read_file(corpus_dir / "manifest.json")));
    const fs::path docs_dir = corpus_dir / "documents";
    auto load_doc = [&](const std::string &id) {
      return document_from_json(
          json::parse(text::read_file(docs_dir / (text::safe_filename(id) + ".json"))));
    };
    out.target = load_doc(out.manifest.target_id);
    for (const auto &entry : out.manifest.entries) {
      out.documents.push_back(load_doc(entry.id));
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, "corrupt corpus in " + corpus_dir.string() + ": " + e.what());
  }
  return out;
}

} // namespace novelty::corpus
