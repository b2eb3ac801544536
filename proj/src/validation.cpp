#include "novelty/validation.hpp"

#include "novelty/error.hpp"
#include "novelty/log.hpp"
#include "novelty/parallel.hpp"
#include "novelty/text.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

namespace novelty::validation {

using nlohmann::json;

namespace {

std::string ask(const Agents &agents, const std::string &stage, const std::string &prompt,
                const assets::Vars &vars, const std::string &correction = {}) {
  ChatRequest req;
  req.stage = stage;
  req.user = assets::fill(agents.prompts.get(prompt).user, vars);
  if (!correction.empty()) {
    req.user += "\n\n" + correction;
  }
  return agents.chat.chat(req);
}

json parse_json_list(std::string_view output) {
  const std::string s = text::strip_code_fence(output);
  const std::size_t a = s.find('[');
  const std::size_t b = s.rfind(']');
  if (a == std::string::npos || b == std::string::npos || b < a) {
    fail(ErrorKind::MalformedOutput, "no JSON list in model output");
  }
  try {
    json j = json::parse(s.substr(a, b - a + 1));
    if (!j.is_array()) {
      fail(ErrorKind::MalformedOutput, "model output is not a JSON list");
    }
    return j;
  } catch (const json::exception &e) {
    fail(ErrorKind::MalformedOutput, std::string("invalid JSON list: ") + e.what());
  }
}

std::optional<std::string> opt_string(const json &o, const char *key) {
  if (!o.contains(key) || o.at(key).is_null()) {
    return std::nullopt;
  }
  const json &v = o.at(key);
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  s = text::trim(s);
  if (s.empty()) {
    return std::nullopt;
  }
  return s;
}

void note(std::vector<std::string> *warnings, const std::string &msg) {
  log::warn(msg);
  if (warnings != nullptr) {
    warnings->push_back(msg);
  }
}

std::string numbered(const std::vector<const CitationClaim *> &claims) {
  std::string out;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    out += std::to_string(i + 1) + ". " + claims[i]->claim_explanation + "\n";
  }
  if (!out.empty()) {
    out.pop_back();
  }
  return out;
}

std::vector<std::string> lines_starting(std::string_view md, std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto &l : text::split_lines(md)) {
    if (l.rfind(prefix, 0) == 0) {
      out.push_back(l);
    }
  }
  return out;
}

std::multiset<std::string> classification_labels(std::string_view md) {
  static const std::regex re(R"(Classification:\s*([A-Za-z]+(?:/[A-Za-z]+)?))");
  std::multiset<std::string> out;
  const std::string s(md);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    out.insert((*it)[1].str());
  }
  return out;
}

const std::vector<std::string> &truncation_indicators() {
  static const std::vector<std::string> v{
      "(continued...)", "(to be continued...)", "(rest remains the same...)",
      "(previous content...)", "(...)", "[content omitted]",
      "follows the same format", "follows the same pattern",
  };
  return v;
}

std::string match_trailing_newline(std::string out, std::string_view reference) {
  out = text::strip_code_fence(out);
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ' || out.back() == '\r')) {
    out.pop_back();
  }
  std::size_t trailing = 0;
  while (trailing < reference.size() && reference[reference.size() - 1 - trailing] == '\n') {
    ++trailing;
  }
  out.append(trailing, '\n');
  return out;
}

} // namespace

// --- parsers ------------------------------------------------------------------------

std::vector<CitationClaim> parse_claims(std::string_view output) {
  const json list = parse_json_list(output);
  std::vector<CitationClaim> out;
  for (const auto &item : list) {
    if (!item.is_object()) {
      fail(ErrorKind::MalformedOutput, "claim entry is not an object");
    }
    CitationClaim c;
    c.original_statement = opt_string(item, "original_statement").value_or("");
    c.claim_explanation = opt_string(item, "claim_explanation").value_or("");
    c.reference_name = opt_string(item, "reference_name").value_or("");
    if (c.original_statement.empty() || c.reference_name.empty()) {
      fail(ErrorKind::MalformedOutput, "claim entry lacks original_statement or reference_name");
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<int> parse_index_list(std::string_view output) {
  const json list = parse_json_list(output);
  std::vector<int> out;
  for (const auto &v : list) {
    if (v.is_number_integer()) {
      out.push_back(v.get<int>());
    } else if (v.is_string()) {
      try {
        std::size_t used = 0;
        const std::string s = text::trim(v.get<std::string>());
        const int n = std::stoi(s, &used);
        if (used == s.size()) {
          out.push_back(n);
        }
      } catch (const std::exception &) {
      }
    }
  }
  return out;
}

std::vector<RawVerdict> parse_verdicts(std::string_view output) {
  const json list = parse_json_list(output);
  std::vector<RawVerdict> out;
  for (const auto &item : list) {
    if (!item.is_object() || !item.contains("idx")) {
      fail(ErrorKind::MalformedOutput, "verdict entry lacks idx");
    }
    RawVerdict v;
    const json &idx = item.at("idx");
    if (idx.is_number_integer()) {
      v.idx = idx.get<int>();
    } else if (idx.is_string()) {
      try {
        v.idx = std::stoi(idx.get<std::string>());
      } catch (const std::exception &) {
        fail(ErrorKind::MalformedOutput, "verdict idx is not an integer");
      }
    } else {
      fail(ErrorKind::MalformedOutput, "verdict idx is not an integer");
    }
    v.result = text::to_lower(opt_string(item, "result").value_or(""));
    v.error_reason = opt_string(item, "error_reason");
    v.correction = opt_string(item, "correction");
    out.push_back(std::move(v));
  }
  return out;
}

std::optional<report::Reference> resolve_reference(std::string_view reference_name,
                                                   const std::vector<report::Reference> &refs) {
  std::string s = text::trim(reference_name);
  static const std::regex numeral(R"(^\[?(\d+)\]?\s*(.*)$)");
  std::smatch m;
  if (std::regex_match(s, m, numeral)) {
    const int n = std::stoi(m[1].str());
    if (n >= 1 && static_cast<std::size_t>(n) <= refs.size()) {
      return refs[static_cast<std::size_t>(n - 1)];
    }
    s = text::trim(m[2].str());
  }
  if (s.rfind("##", 0) == 0) {
    s = s.substr(2);
  }
  if (s.size() >= 2 && s.compare(s.size() - 2, 2, "$$") == 0) {
    s.resize(s.size() - 2);
  }
  s = text::trim(s);
  if (s.empty()) {
    return std::nullopt;
  }
  for (const auto &r : refs) {
    if (r.name == s) {
      return r;
    }
  }
  const std::string folded = text::fold_title(s);
  for (const auto &r : refs) {
    if (text::fold_title(r.name) == folded) {
      return r;
    }
  }
  return std::nullopt;
}

std::optional<std::string> locate_statement(std::string_view report, std::string_view statement) {
  if (statement.empty()) {
    return std::nullopt;
  }
  if (report.find(statement) != std::string_view::npos) {
    return std::string(statement);
  }
  // Collapse whitespace runs on both sides, remembering where each
  // normalised byte came from in the report.
  std::string norm;
  std::vector<std::size_t> origin;
  bool pending_space = false;
  for (std::size_t i = 0; i < report.size(); ++i) {
    const char c = report[i];
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      pending_space = !norm.empty();
      continue;
    }
    if (pending_space) {
      norm += ' ';
      origin.push_back(i);
      pending_space = false;
    }
    norm += c;
    origin.push_back(i);
  }
  const std::string needle = text::normalize_whitespace(statement);
  if (needle.empty()) {
    return std::nullopt;
  }
  const std::size_t at = norm.find(needle);
  if (at == std::string::npos) {
    return std::nullopt;
  }
  const std::size_t begin = origin[at];
  const std::size_t end = origin[at + needle.size() - 1] + 1;
  return std::string(report.substr(begin, end - begin));
}

// --- stages -------------------------------------------------------------------------

std::vector<CitationClaim> extract_claims(std::string_view markdown,
                                          const std::vector<report::Reference> &refs,
                                          const Agents &agents, std::vector<std::string> *warnings) {
  const assets::Vars vars{{"report_text", std::string(markdown)}};
  std::vector<CitationClaim> raw;
  std::string correction;
  for (int attempt = 0;; ++attempt) {
    try {
      raw = parse_claims(ask(agents, "claims", "validation_extract", vars, correction));
      break;
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::MalformedOutput || attempt == 1) {
        throw;
      }
      correction = std::string("Your previous answer could not be parsed (") + e.what() +
                   "). Output only the JSON list.";
    }
  }
  std::vector<CitationClaim> out;
  for (auto &c : raw) {
    const auto ref = resolve_reference(c.reference_name, refs);
    if (!ref) {
      note(warnings, "claims: dropped claim with unknown reference '" + c.reference_name + "'");
      continue;
    }
    const auto span = locate_statement(markdown, c.original_statement);
    if (!span) {
      note(warnings, "claims: dropped claim whose statement is not in the report: '" +
                         c.original_statement.substr(0, 80) + "'");
      continue;
    }
    c.original_statement = *span;
    c.doc_id = ref->doc_id;
    c.reference_name = ref->name;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CitationClaim> dedup_claims(const std::vector<CitationClaim> &claims,
                                        const Agents &agents) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    auto &g = groups[claims[i].doc_id];
    if (g.empty()) {
      order.push_back(claims[i].doc_id);
    }
    g.push_back(i);
  }
  std::vector<bool> keep(claims.size(), true);
  for (const auto &doc_id : order) {
    const auto &members = groups[doc_id];
    if (members.size() < 2) {
      continue;
    }
    std::vector<const CitationClaim *> group;
    for (std::size_t i : members) {
      group.push_back(&claims[i]);
    }
    const assets::Vars vars{{"statements", numbered(group)}};
    const std::string stage = "dedup." + doc_id;
    std::vector<int> picked;
    std::string correction;
    for (int attempt = 0;; ++attempt) {
      try {
        picked = parse_index_list(ask(agents, stage, "validation_dedup", vars, correction));
        break;
      } catch (const Error &e) {
        if (e.kind() != ErrorKind::MalformedOutput || attempt == 1) {
          throw;
        }
        correction = "Your previous answer could not be parsed. Output only the integer list, e.g. [1, 3].";
      }
    }
    std::set<std::size_t> kept;
    for (int n : picked) {
      if (n >= 1 && static_cast<std::size_t>(n) <= members.size()) {
        kept.insert(static_cast<std::size_t>(n - 1));
      }
    }
    if (kept.empty()) {
      log::warn(stage + ": no valid indices returned; keeping every claim of the group");
      continue;
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      keep[members[k]] = kept.count(k) != 0;
    }
  }
  std::vector<CitationClaim> out;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (keep[i]) {
      out.push_back(claims[i]);
    }
  }
  return out;
}

std::vector<VerificationVerdict> verify_claims(const corpus::Document &doc,
                                               const std::vector<CitationClaim> &claims,
                                               const ingest::Tokenizer &tokenizer,
                                               const Agents &agents,
                                               const ValidationOptions &options) {
  if (claims.empty()) {
    return {};
  }
  if (doc.ingest_status != corpus::IngestStatus::resolved) {
    fail(ErrorKind::InvalidInput, "cannot verify against unresolved document " + doc.meta.id);
  }
  std::vector<const CitationClaim *> ptrs;
  for (const auto &c : claims) {
    ptrs.push_back(&c);
  }
  const assets::Vars vars{
      {"reference_text", std::string(tokenizer.head(doc.cleaned_text, options.source_budget_tokens))},
      {"claims", numbered(ptrs)}};
  const std::string stage = "verify." + doc.meta.id;
  std::string correction;
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<RawVerdict> raws;
    try {
      raws = parse_verdicts(ask(agents, stage, "validation_verify", vars, correction));
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::MalformedOutput) {
        throw;
      }
      problem = e.what();
      correction = "Your previous answer could not be parsed. Output only the JSON list.";
      continue;
    }
    std::map<std::size_t, RawVerdict> by_idx;
    problem.clear();
    for (auto &r : raws) {
      if (r.idx < 1 || static_cast<std::size_t>(r.idx) > claims.size()) {
        log::warn(stage + ": ignoring verdict for out-of-range idx " + std::to_string(r.idx));
        continue;
      }
      if (r.result != "correct" && r.result != "incorrect") {
        problem = "claim " + std::to_string(r.idx) + " has result '" + r.result + "'";
        break;
      }
      if (r.result == "incorrect" && (!r.correction || !r.error_reason)) {
        problem = "claim " + std::to_string(r.idx) + " is incorrect but lacks error_reason or correction";
        break;
      }
      by_idx.emplace(static_cast<std::size_t>(r.idx), std::move(r));
    }
    if (problem.empty() && options.fail_closed && by_idx.size() != claims.size()) {
      problem = std::to_string(claims.size() - by_idx.size()) + " claims have no verdict";
    }
    if (!problem.empty()) {
      correction = "Your previous answer was rejected: " + problem +
                   ". Return one entry per claim; every incorrect entry needs error_reason and correction.";
      continue;
    }
    std::vector<VerificationVerdict> out;
    for (std::size_t i = 0; i < claims.size(); ++i) {
      VerificationVerdict v;
      v.claim = claims[i];
      const auto it = by_idx.find(i + 1);
      if (it == by_idx.end()) {
        v.defaulted = true;
        log::warn(stage + ": no verdict for claim " + std::to_string(i + 1) + ", treating it as correct");
      } else if (it->second.result == "incorrect") {
        v.result = Verdict::incorrect;
        v.error_reason = it->second.error_reason;
        v.correction = it->second.correction;
      }
      out.push_back(std::move(v));
    }
    return out;
  }
  fail(ErrorKind::MalformedOutput, stage + ": " + problem);
}

std::vector<std::string> preservation_violations(std::string_view before, std::string_view after) {
  std::vector<std::string> v;
  if (report::top_headers(before) != report::top_headers(after)) {
    v.push_back("section headers changed");
  }
  if (lines_starting(before, "### ") != lines_starting(after, "### ")) {
    v.push_back("novelty point headers changed");
  }
  if (report::references_section(before) != report::references_section(after)) {
    v.push_back("references section changed");
  }
  const auto score_of = [](std::string_view md) { return report::parse_report(md).score; };
  if (score_of(before) != score_of(after)) {
    v.push_back("novelty score changed");
  }
  if (report::cited_numerals(report::body_section(before)) !=
      report::cited_numerals(report::body_section(after))) {
    v.push_back("set of cited reference numerals changed");
  }
  if (classification_labels(before) != classification_labels(after)) {
    v.push_back("innovation classifications changed");
  }
  return v;
}

std::string correct_report(std::string_view markdown,
                           const std::vector<VerificationVerdict> &verdicts, const Agents &agents) {
  json incorrect = json::array();
  for (const auto &v : verdicts) {
    if (v.result == Verdict::incorrect) {
      incorrect.push_back({{"original_statement", v.claim.original_statement},
                           {"claim_explanation", v.claim.claim_explanation},
                           {"reference_name", v.claim.reference_name},
                           {"result", "incorrect"},
                           {"error_reason", v.error_reason.value_or("")},
                           {"correction", v.correction.value_or("")}});
    }
  }
  if (incorrect.empty()) {
    return std::string(markdown);
  }
  const assets::Vars vars{{"original_report", std::string(markdown)},
                          {"validation_results", incorrect.dump(2)}};
  const std::string out = match_trailing_newline(ask(agents, "correct", "validation_correct", vars), markdown);
  const auto problems = preservation_violations(markdown, out);
  if (!problems.empty()) {
    std::string msg = "correction broke the report structure:";
    for (const auto &p : problems) {
      msg += " " + p + ";";
    }
    fail(ErrorKind::StructureViolation, msg);
  }
  return out;
}

PolishOutcome polish_report(std::string_view markdown, const Agents &agents) {
  PolishOutcome o;
  const assets::Vars vars{{"report_content", std::string(markdown)}};
  const std::string out = match_trailing_newline(ask(agents, "polish", "polish", vars), markdown);
  if (out.rfind(report::kSection1, 0) != 0) {
    o.rejected_because.push_back("output does not start with the section 1 header");
  }
  for (const auto &p : report::structure_violations(out)) {
    o.rejected_because.push_back(p);
  }
  for (const auto &p : preservation_violations(markdown, out)) {
    o.rejected_because.push_back(p);
  }
  for (const auto &t : truncation_indicators()) {
    if (text::contains_ci(out, t) && !text::contains_ci(markdown, t)) {
      o.rejected_because.push_back("truncation indicator \"" + t + "\"");
    }
  }
  if (o.rejected_because.empty()) {
    o.markdown = out;
    o.applied = true;
  } else {
    o.markdown = std::string(markdown);
    std::string msg = "polish: keeping the unpolished report:";
    for (const auto &p : o.rejected_because) {
      msg += " " + p + ";";
    }
    log::warn(msg);
  }
  return o;
}

// --- diff ------------------------------------------------------------------------------

std::vector<DiffLine> line_diff(std::string_view before, std::string_view after) {
  const auto a = text::split_lines(before);
  const auto b = text::split_lines(after);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::vector<std::uint32_t>> lcs(n + 1, std::vector<std::uint32_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  std::vector<DiffLine> out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n || j < m) {
    if (i < n && j < m && a[i] == b[j]) {
      ++i;
      ++j;
    } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
      out.push_back({'+', 0, j + 1, b[j]});
      ++j;
    } else {
      out.push_back({'-', i + 1, 0, a[i]});
      ++i;
    }
  }
  return out;
}

// --- pipeline -----------------------------------------------------------------------------

ValidationResult validate_report(std::string_view markdown, const corpus::DocumentCatalog &catalog,
                                 const ingest::Tokenizer &tokenizer, const Agents &agents,
                                 const ValidationOptions &options) {
  ValidationResult r;
  r.input = std::string(markdown);
  const report::Report parsed = report::parse_report(markdown, &catalog);
  r.extracted = extract_claims(markdown, parsed.references, agents, &r.warnings);
  r.kept = dedup_claims(r.extracted, agents);

  std::vector<std::string> docs;
  std::map<std::string, std::vector<CitationClaim>> by_doc;
  for (const auto &c : r.kept) {
    const corpus::Document *doc = catalog.by_id(c.doc_id);
    if (doc == nullptr || doc->ingest_status != corpus::IngestStatus::resolved) {
      note(&r.warnings, "verify: no resolved full text for '" + c.doc_id + "', claim left unverified");
      continue;
    }
    auto &list = by_doc[c.doc_id];
    if (list.empty()) {
      docs.push_back(c.doc_id);
    }
    list.push_back(c);
  }
  std::vector<std::vector<VerificationVerdict>> per_doc(docs.size());
  parallel_for(docs.size(), options.max_parallel, [&](std::size_t i) {
    per_doc[i] = verify_claims(*catalog.by_id(docs[i]), by_doc[docs[i]], tokenizer, agents, options);
  });
  for (auto &v : per_doc) {
    r.verdicts.insert(r.verdicts.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }

  r.corrected = correct_report(markdown, r.verdicts, agents);
  r.correction_diff = line_diff(markdown, r.corrected);
  if (options.polish) {
    r.polish = polish_report(r.corrected, agents);
  } else {
    r.polish.markdown = r.corrected;
  }
  for (const auto &p : r.polish.rejected_because) {
    r.warnings.push_back("polish rejected: " + p);
  }
  r.output = r.polish.markdown;
  return r;
}

// --- artifacts ----------------------------------------------------------------------------

json to_json(const CitationClaim &c) {
  return {{"original_statement", c.original_statement},
          {"claim_explanation", c.claim_explanation},
          {"reference_name", c.reference_name},
          {"doc_id", c.doc_id}};
}

json to_json(const VerificationVerdict &v) {
  return {{"claim", to_json(v.claim)},
          {"result", v.result == Verdict::correct ? "correct" : "incorrect"},
          {"error_reason", v.error_reason ? json(*v.error_reason) : json(nullptr)},
          {"correction", v.correction ? json(*v.correction) : json(nullptr)},
          {"defaulted", v.defaulted}};
}

json claims_artifact(const ValidationResult &r) {
  json extracted = json::array();
  for (const auto &c : r.extracted) {
    extracted.push_back(to_json(c));
  }
  json kept = json::array();
  for (const auto &c : r.kept) {
    kept.push_back(to_json(c));
  }
  return {{"extracted", std::move(extracted)}, {"kept", std::move(kept)}, {"warnings", r.warnings}};
}

json verdicts_artifact(const ValidationResult &r) {
  json list = json::array();
  std::size_t incorrect = 0;
  for (const auto &v : r.verdicts) {
    list.push_back(to_json(v));
    incorrect += v.result == Verdict::incorrect ? 1 : 0;
  }
  return {{"verdicts", std::move(list)}, {"claims", r.verdicts.size()}, {"incorrect", incorrect}};
}

json corrections_artifact(const ValidationResult &r) {
  json diff = json::array();
  for (const auto &d : r.correction_diff) {
    diff.push_back({{"op", std::string(1, d.op)},
                    {"old_line", d.old_line},
                    {"new_line", d.new_line},
                    {"text", d.text}});
  }
  return {{"correction_diff", std::move(diff)},
          {"polish_applied", r.polish.applied},
          {"polish_rejected_because", r.polish.rejected_because}};
}

VerdictCounts count_verdicts(const json &artifact) {
  VerdictCounts c;
  try {
    for (const auto &v : artifact.at("verdicts")) {
      ++c.claims;
      if (v.at("result").get<std::string>() == "incorrect") {
        ++c.incorrect;
      }
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, std::string("malformed verdicts artifact: ") + e.what());
  }
  return c;
}

} // namespace novelty::validation
