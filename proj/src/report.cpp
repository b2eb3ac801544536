#include "novelty/report.hpp"

#include "novelty/error.hpp"
#include "novelty/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>

namespace novelty::report {

using nlohmann::json;

namespace {

struct ClassName {
  Classification value;
  std::string_view label;
};

constexpr std::array<ClassName, 6> kClasses{{
    {Classification::methodological, "Methodological/Algorithmic"},
    {Classification::theoretical, "Theoretical"},
    {Classification::system, "System/Infrastructure"},
    {Classification::dataset, "Dataset/Benchmark"},
    {Classification::empirical, "Empirical/Analytical"},
    {Classification::task, "Task/Application"},
}};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string rtrim(std::string_view s) {
  while (!s.empty() && is_space(s.back())) {
    s.remove_suffix(1);
  }
  return std::string(s);
}

const std::regex &numeral_re() {
  static const std::regex re(R"(\[(\d+)\])");
  return re;
}

std::string strip_numerals(const std::string &s) {
  std::string out = std::regex_replace(s, std::regex(R"(\s*\[\d+\])"), "");
  return text::trim(out);
}

} // namespace

std::string_view to_string(Classification c) {
  for (const auto &k : kClasses) {
    if (k.value == c) {
      return k.label;
    }
  }
  return "Methodological/Algorithmic";
}

std::optional<Classification> parse_classification(std::string_view s) {
  const std::string want = text::to_lower(text::trim(s));
  if (want.empty()) {
    return std::nullopt;
  }
  for (const auto &k : kClasses) {
    const std::string label = text::to_lower(k.label);
    if (want == label) {
      return k.value;
    }
    const auto slash = label.find('/');
    if (slash != std::string::npos &&
        (want == label.substr(0, slash) || want == label.substr(slash + 1))) {
      return k.value;
    }
  }
  return std::nullopt;
}

// --- markers --------------------------------------------------------------------

std::vector<Marker> find_markers(std::string_view text) {
  std::vector<Marker> out;
  std::size_t pos = 0;
  while ((pos = text.find("##", pos)) != std::string_view::npos) {
    const std::size_t close = text.find("$$", pos + 2);
    const std::size_t nl = text.find('\n', pos + 2);
    if (close == std::string_view::npos || (nl != std::string_view::npos && nl < close)) {
      pos += 2;
      continue;
    }
    std::string name = text::trim(text.substr(pos + 2, close - pos - 2));
    // "## Heading" lines are not markers; names never contain '#'.
    if (name.empty() || name.find('#') != std::string::npos) {
      pos += 2;
      continue;
    }
    out.push_back({pos, close + 2, std::move(name)});
    pos = close + 2;
  }
  return out;
}

std::string strip_markers(std::string_view text) {
  std::string out;
  std::size_t last = 0;
  for (const auto &m : find_markers(text)) {
    out += rtrim(text.substr(last, m.begin - last));
    last = m.end;
  }
  out += text.substr(last);
  return out;
}

std::string sentence_before(std::string_view text, std::size_t pos) {
  // Drop any markers directly preceding pos so "x.##A$$##B$$" resolves B to x.
  std::string prefix = rtrim(text.substr(0, pos));
  for (;;) {
    const auto markers = find_markers(prefix);
    if (markers.empty() || markers.back().end != prefix.size()) {
      break;
    }
    prefix = rtrim(std::string_view(prefix).substr(0, markers.back().begin));
  }
  std::size_t start = 0;
  if (prefix.size() >= 2) {
    for (std::size_t j = prefix.size() - 1; j-- > 0;) {
      const char c = prefix[j];
      if (c == '\n') {
        start = j + 1;
        break;
      }
      if ((c == '.' || c == '!' || c == '?') && is_space(prefix[j + 1])) {
        start = j + 1;
        break;
      }
    }
  }
  return strip_numerals(text::trim(strip_markers(std::string_view(prefix).substr(start))));
}

std::string rewrite_markers(std::string_view text,
                            const std::function<int(const std::string &)> &number_of) {
  std::string out;
  std::size_t last = 0;
  for (const auto &m : find_markers(text)) {
    const bool adjacent = m.begin == last && last != 0 && !out.empty() && out.back() == ']';
    std::string gap(text.substr(last, m.begin - last));
    if (adjacent) {
      out += gap;
    } else {
      out += rtrim(gap);
      out += ' ';
    }
    out += '[' + std::to_string(number_of(m.name)) + ']';
    last = m.end;
  }
  out += text.substr(last);
  return out;
}

// --- rendering ----------------------------------------------------------------

std::string render_markdown(const Report &r) {
  std::string md;
  md += kSection1;
  md += "\n\n" + text::trim(r.content_summary) + "\n\n";
  md += kSection2;
  md += "\n\n";
  if (r.analyses.empty()) {
    md += std::string(kNoClaims) + "\n\n";
  }
  for (std::size_t i = 0; i < r.analyses.size(); ++i) {
    const auto &a = r.analyses[i];
    const std::string k = std::to_string(i + 1);
    md += "### 2." + k + ". Novelty Point " + k + "\n\n";
    md += "a) Claimed novelty: " + text::trim(a.claimed_novelty) + "\n\n";
    md += "b) Similarities: " + text::trim(a.similarities) + "\n\n";
    md += "c) Unique Differences: " + text::trim(a.unique_differences) + "\n\n";
    if (a.details) {
      md += "d) Details of Unique Differences: " + text::trim(*a.details) + "\n\n";
    }
  }
  md += kSection3;
  md += "\n\n" + text::trim(r.novelty_summary) + "\n\n";
  md += kReferences;
  md += "\n";
  if (!r.references.empty()) {
    md += "\n";
  }
  for (std::size_t i = 0; i < r.references.size(); ++i) {
    md += "[" + std::to_string(i + 1) + "] " + r.references[i].name + "\n";
  }
  return md;
}

json to_json(const Report &r) {
  json analyses = json::array();
  for (const auto &a : r.analyses) {
    json cites = json::array();
    for (const auto &c : a.citations) {
      cites.push_back({{"sentence", c.sentence}, {"doc_id", c.doc_id}});
    }
    analyses.push_back({
        {"index", a.point.index},
        {"classification", std::string(to_string(a.point.classification))},
        {"description", a.point.description},
        {"claimed_novelty", a.claimed_novelty},
        {"similarities", a.similarities},
        {"unique_differences", a.unique_differences},
        {"details", a.details ? json(*a.details) : json(nullptr)},
        {"citations", std::move(cites)},
    });
  }
  json refs = json::array();
  for (const auto &ref : r.references) {
    refs.push_back({{"doc_id", ref.doc_id}, {"name", ref.name}});
  }
  return {
      {"paper_name", r.paper_name},
      {"content_summary", r.content_summary},
      {"analyses", std::move(analyses)},
      {"novelty_summary", r.novelty_summary},
      {"score", r.score},
      {"references", std::move(refs)},
  };
}

// --- parsing ------------------------------------------------------------------

std::vector<std::string> top_headers(std::string_view markdown) {
  std::vector<std::string> out;
  for (const auto &line : text::split_lines(markdown)) {
    if (line.rfind("## ", 0) == 0) {
      out.push_back(rtrim(line));
    }
  }
  return out;
}

namespace {

// Byte offset of the line equal to `header` (after trailing-space trim).
std::optional<std::size_t> header_offset(std::string_view md, std::string_view header) {
  std::size_t pos = 0;
  while (pos <= md.size()) {
    const std::size_t nl = md.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? md.size() : nl;
    std::string_view line = md.substr(pos, end - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.remove_suffix(1);
    }
    if (line == header) {
      return pos;
    }
    if (nl == std::string_view::npos) {
      break;
    }
    pos = nl + 1;
  }
  return std::nullopt;
}

std::string between(std::string_view md, std::string_view from, std::string_view to) {
  const auto a = header_offset(md, from);
  if (!a) {
    return {};
  }
  const std::size_t start = md.find('\n', *a);
  if (start == std::string_view::npos) {
    return {};
  }
  const auto b = header_offset(md, to);
  const std::size_t stop = b && *b > start ? *b : md.size();
  return text::trim(md.substr(start + 1, stop - start - 1));
}

const std::regex &point_header_re() {
  static const std::regex re(R"(^###\s*2\.(\d+)\.?\s*Novelty Point\s*(\d+)\s*$)");
  return re;
}

struct Subsections {
  std::string a, b, c;
  std::optional<std::string> d;
};

Subsections split_subsections(const std::vector<std::string> &lines) {
  static const std::array<std::string_view, 4> labels{
      "a) Claimed novelty:", "b) Similarities:", "c) Unique Differences:",
      "d) Details of Unique Differences:"};
  std::array<std::optional<std::string>, 4> parts;
  int current = -1;
  for (const auto &line : lines) {
    int hit = -1;
    for (int k = 0; k < 4; ++k) {
      if (line.rfind(labels[static_cast<std::size_t>(k)], 0) == 0) {
        hit = k;
        break;
      }
    }
    if (hit >= 0) {
      current = hit;
      parts[static_cast<std::size_t>(hit)] =
          line.substr(labels[static_cast<std::size_t>(hit)].size());
      continue;
    }
    if (current >= 0) {
      *parts[static_cast<std::size_t>(current)] += "\n" + line;
    }
  }
  Subsections s;
  s.a = text::trim(parts[0].value_or(""));
  s.b = text::trim(parts[1].value_or(""));
  s.c = text::trim(parts[2].value_or(""));
  if (parts[3]) {
    s.d = text::trim(*parts[3]);
  }
  return s;
}

Classification classification_of(std::string_view claimed) {
  static const std::regex re(R"(Classification:\s*([A-Za-z/ ]+))", std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(claimed.begin(), claimed.end(), m, re)) {
    if (const auto c = parse_classification(m[1].str())) {
      return *c;
    }
  }
  return Classification::methodological;
}

void collect_citations(PointAnalysis &a, const std::vector<Reference> &refs) {
  for (const std::string *section : {&a.claimed_novelty, &a.similarities, &a.unique_differences}) {
    const std::string &t = *section;
    for (auto it = std::sregex_iterator(t.begin(), t.end(), numeral_re()); it != std::sregex_iterator(); ++it) {
      const int n = std::stoi((*it)[1].str());
      if (n >= 1 && static_cast<std::size_t>(n) <= refs.size()) {
        a.citations.push_back({sentence_before(t, static_cast<std::size_t>(it->position())),
                               refs[static_cast<std::size_t>(n - 1)].doc_id});
      }
    }
  }
  if (a.details) {
    const std::string &t = *a.details;
    for (auto it = std::sregex_iterator(t.begin(), t.end(), numeral_re()); it != std::sregex_iterator(); ++it) {
      const int n = std::stoi((*it)[1].str());
      if (n >= 1 && static_cast<std::size_t>(n) <= refs.size()) {
        a.citations.push_back({sentence_before(t, static_cast<std::size_t>(it->position())),
                               refs[static_cast<std::size_t>(n - 1)].doc_id});
      }
    }
  }
}

} // namespace

Report parse_report(std::string_view markdown, const corpus::DocumentCatalog *catalog) {
  Report r;
  r.content_summary = between(markdown, kSection1, kSection2);
  r.novelty_summary = between(markdown, kSection3, kReferences);
  r.score = parse_score(r.novelty_summary).value_or(0);

  static const std::regex ref_re(R"(^\[(\d+)\]\s+(.+?)\s*$)");
  for (const auto &line : text::split_lines(references_section(markdown))) {
    std::smatch m;
    if (std::regex_match(line, m, ref_re)) {
      Reference ref;
      ref.name = m[2].str();
      ref.doc_id = ref.name;
      if (catalog != nullptr) {
        if (const auto *doc = catalog->by_name(ref.name)) {
          ref.doc_id = doc->meta.id;
        }
      }
      r.references.push_back(std::move(ref));
    }
  }

  const std::string section2 = between(markdown, kSection2, kSection3);
  std::vector<std::string> block;
  int index = 0;
  const auto flush = [&] {
    if (index == 0) {
      return;
    }
    const Subsections s = split_subsections(block);
    PointAnalysis a;
    a.point.index = index;
    a.point.classification = classification_of(s.a);
    a.claimed_novelty = s.a;
    a.similarities = s.b;
    a.unique_differences = s.c;
    a.details = s.d;
    collect_citations(a, r.references);
    r.analyses.push_back(std::move(a));
    block.clear();
  };
  for (const auto &line : text::split_lines(section2)) {
    std::smatch m;
    if (std::regex_match(line, m, point_header_re())) {
      flush();
      index = std::stoi(m[1].str());
      continue;
    }
    block.push_back(line);
  }
  flush();
  return r;
}

std::optional<int> parse_score(std::string_view section3) {
  std::string lower = text::to_lower(section3);
  std::string_view scope;
  const std::size_t at = lower.rfind("final one-line summary");
  if (at != std::string::npos) {
    scope = section3.substr(at + std::string_view("final one-line summary").size());
  } else {
    const auto lines = text::split_lines(section3);
    auto it = std::find_if(lines.rbegin(), lines.rend(),
                           [](const std::string &l) { return !text::trim(l).empty(); });
    if (it == lines.rend()) {
      return std::nullopt;
    }
    const std::size_t off = section3.rfind(*it);
    scope = section3.substr(off, it->size());
  }
  for (std::size_t i = 0; i < scope.size(); ++i) {
    if (!is_digit(scope[i])) {
      continue;
    }
    if (i > 0 && std::isalnum(static_cast<unsigned char>(scope[i - 1])) != 0) {
      continue;
    }
    std::size_t j = i;
    while (j < scope.size() && is_digit(scope[j])) {
      ++j;
    }
    const bool decimal = j + 1 < scope.size() && scope[j] == '.' && is_digit(scope[j + 1]);
    const int v = std::stoi(std::string(scope.substr(i, j - i)));
    if (decimal || v < 1 || v > 4) {
      return std::nullopt;
    }
    return v;
  }
  return std::nullopt;
}

// --- structure --------------------------------------------------------------------

std::string references_section(std::string_view markdown) {
  const auto at = header_offset(markdown, kReferences);
  return at ? std::string(markdown.substr(*at)) : std::string();
}

std::string body_section(std::string_view markdown) {
  const auto at = header_offset(markdown, kReferences);
  return std::string(at ? markdown.substr(0, *at) : markdown);
}

std::set<int> cited_numerals(std::string_view body) {
  std::set<int> out;
  const std::string s(body);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), numeral_re()); it != std::sregex_iterator(); ++it) {
    out.insert(std::stoi((*it)[1].str()));
  }
  return out;
}

std::vector<std::string> structure_violations(std::string_view markdown) {
  std::vector<std::string> v;
  const std::vector<std::string> want{std::string(kSection1), std::string(kSection2),
                                      std::string(kSection3), std::string(kReferences)};
  if (top_headers(markdown) != want) {
    v.push_back("top-level sections are not exactly 1, 2, 3, References in order");
  }
  if (!parse_score(between(markdown, kSection3, kReferences))) {
    v.push_back("section 3 has no score in {1,2,3,4}");
  }
  static const std::regex ref_re(R"(^\[(\d+)\]\s+\S.*$)");
  int expected = 1;
  for (const auto &line : text::split_lines(references_section(markdown))) {
    std::smatch m;
    if (std::regex_match(line, m, ref_re)) {
      if (std::stoi(m[1].str()) != expected) {
        v.push_back("references are not numbered consecutively from 1");
        break;
      }
      ++expected;
    }
  }
  const int count = expected - 1;
  const auto used = cited_numerals(body_section(markdown));
  for (int n : used) {
    if (n < 1 || n > count) {
      v.push_back("citation [" + std::to_string(n) + "] has no references entry");
    }
  }
  for (int n = 1; n <= count; ++n) {
    if (used.count(n) == 0) {
      v.push_back("reference [" + std::to_string(n) + "] is never cited");
    }
  }
  return v;
}

} // namespace novelty::report
