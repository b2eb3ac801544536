#include "novelty/generation.hpp"

#include "novelty/error.hpp"
#include "novelty/log.hpp"
#include "novelty/parallel.hpp"
#include "novelty/text.hpp"

#include <map>
#include <mutex>
#include <regex>

namespace novelty::generation {

using nlohmann::json;

namespace {

std::string ask(const Agents &agents, const std::string &stage, const assets::ChatTemplate &t,
                const assets::Vars &system_vars, const assets::Vars &user_vars,
                const std::string &correction = {}) {
  ChatRequest req;
  req.stage = stage;
  req.system = system_vars.empty() ? t.system : assets::fill(t.system, system_vars);
  req.user = assets::fill(t.user, user_vars);
  if (!correction.empty()) {
    req.user += "\n\n" + correction;
  }
  return agents.chat.chat(req);
}

const std::regex &numbered_re() {
  static const std::regex re(R"(^\s*(?:\*\*)?(\d+)[.)](?:\*\*)?\s+(.*)$)");
  return re;
}

std::string unquote(std::string s) {
  s = text::trim(s);
  while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    s = text::trim(s.substr(1, s.size() - 2));
  }
  return s;
}

} // namespace

// --- parsers ----------------------------------------------------------------

ParsedPoints parse_novelty_points(std::string_view output) {
  ParsedPoints out;
  const std::string cleaned = text::strip_code_fence(output);
  std::vector<std::string> items;
  for (const auto &line : text::split_lines(cleaned)) {
    std::smatch m;
    if (std::regex_match(line, m, numbered_re())) {
      items.push_back(m[2].str());
    } else if (!items.empty() && !text::trim(line).empty()) {
      items.back() += " " + text::trim(line);
    }
  }
  if (items.empty()) {
    if (text::contains_ci(cleaned, report::kNoClaims.substr(0, report::kNoClaims.size() - 1))) {
      out.sentinel = true;
    } else {
      out.problem = "no numbered innovation list found";
    }
    return out;
  }
  static const std::regex cls_re(R"(\(?\s*Classification\s*:\s*([^)\n;]+?)\s*\)\s*)", std::regex::icase);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::smatch m;
    const std::string &item = items[i];
    if (!std::regex_search(item, m, cls_re)) {
      out.problem = "item " + std::to_string(i + 1) + " has no classification";
      return out;
    }
    const auto cls = report::parse_classification(m[1].str());
    if (!cls) {
      out.problem = "item " + std::to_string(i + 1) + " has unknown classification '" + m[1].str() + "'";
      return out;
    }
    NoveltyPoint p;
    p.index = static_cast<int>(i + 1);
    p.classification = *cls;
    p.description = text::trim(m.prefix().str() + m.suffix().str());
    out.points.push_back(std::move(p));
  }
  if (out.points.size() > kMaxPoints) {
    out.problem = "more than " + std::to_string(kMaxPoints) + " innovations listed";
  }
  return out;
}

std::vector<std::string> parse_numbered_lines(std::string_view output) {
  std::vector<std::string> out;
  for (const auto &line : text::split_lines(text::strip_code_fence(output))) {
    std::smatch m;
    if (std::regex_match(line, m, numbered_re())) {
      std::string q = unquote(m[2].str());
      if (!q.empty()) {
        out.push_back(std::move(q));
      }
    }
  }
  return out;
}

std::string query_problem(const std::vector<std::string> &queries, std::size_t count,
                          const std::vector<std::string> &stop_phrases) {
  if (queries.size() != count) {
    return "expected exactly " + std::to_string(count) + " numbered queries, got " +
           std::to_string(queries.size());
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (const auto hit = assets::find_stop_phrase(queries[i], stop_phrases)) {
      return "query " + std::to_string(i + 1) + " uses the forbidden term \"" + *hit + "\"";
    }
  }
  return {};
}

ParsedAnalysis parse_analysis(std::string_view output) {
  static const std::regex label_re(
      R"(^[\s*#>\-]*(?:\*\*)?([a-dA-D])[).](?:\*\*)?\s*(?:\*\*)?\s*(Claimed novelty|Similarities|Unique Differences|Details of Unique Differences)\s*(?:\*\*)?\s*:?\s*(?:\*\*)?\s*(.*)$)",
      std::regex::icase);
  std::array<std::optional<std::string>, 4> parts;
  int current = -1;
  for (const auto &line : text::split_lines(text::strip_code_fence(output))) {
    std::smatch m;
    if (std::regex_match(line, m, label_re)) {
      current = std::tolower(static_cast<unsigned char>(m[1].str()[0])) - 'a';
      parts[static_cast<std::size_t>(current)] = m[3].str();
      continue;
    }
    if (current >= 0) {
      *parts[static_cast<std::size_t>(current)] += "\n" + line;
    }
  }
  ParsedAnalysis out;
  static const char *names[] = {"a) Claimed novelty", "b) Similarities", "c) Unique Differences"};
  for (std::size_t k = 0; k < 3; ++k) {
    if (!parts[k] || text::trim(*parts[k]).empty()) {
      out.problem = std::string("missing subsection ") + names[k];
      return out;
    }
  }
  out.a = text::trim(*parts[0]);
  out.b = text::trim(*parts[1]);
  out.c = text::trim(*parts[2]);
  if (parts[3] && !text::trim(*parts[3]).empty()) {
    out.d = text::trim(*parts[3]);
  }
  return out;
}

std::string format_knowledge(const std::vector<retrieval::ContextChunk> &context,
                             const corpus::DocumentCatalog &catalog) {
  std::string out;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i > 0) {
      out += "\n\n";
    }
    out += "[Chunk " + std::to_string(i + 1) + "]\n";
    out += "Source Document: " + catalog.name_of(context[i].chunk.doc_id) + "\n";
    out += "Content: " + text::trim(context[i].chunk.text);
  }
  return out;
}

// --- stages -----------------------------------------------------------------------

std::string summarize_paper(const std::string &paper_name, const std::string &paper_text,
                            const Agents &agents) {
  const auto &t = agents.prompts.get("summary");
  const assets::Vars vars{{"paper_name", paper_name}, {"paper_text", paper_text}};
  std::string correction;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string out = text::trim(text::strip_code_fence(ask(agents, "summary", t, {}, vars, correction)));
    if (out.empty()) {
      correction = "Your previous answer was empty. Write the summary as one paragraph.";
      continue;
    }
    if (out.find("\n\n") == std::string::npos && out.find("\n \n") == std::string::npos) {
      return out;
    }
    correction = "Your previous answer had several paragraphs. Rewrite it as a single paragraph.";
  }
  fail(ErrorKind::MalformedOutput, "summary: output is not a single paragraph after one retry");
}

std::vector<NoveltyPoint> extract_novelty_points(const std::string &paper_name,
                                                 const std::string &paper_text,
                                                 const Agents &agents) {
  const auto &t = agents.prompts.get("extraction");
  const assets::Vars vars{{"paper_name", paper_name}, {"paper_text", paper_text}};
  std::string correction;
  for (int attempt = 0; attempt < 2; ++attempt) {
    ParsedPoints parsed = parse_novelty_points(ask(agents, "extraction", t, {}, vars, correction));
    if (parsed.sentinel) {
      return {};
    }
    const bool too_many = parsed.points.size() > kMaxPoints;
    if (parsed.problem.empty() || (too_many && attempt == 1)) {
      if (too_many) {
        log::warn("extraction: keeping the first " + std::to_string(kMaxPoints) + " of " +
                  std::to_string(parsed.points.size()) + " innovations");
        parsed.points.resize(kMaxPoints);
      }
      return parsed.points;
    }
    if (too_many) {
      correction = "Your previous answer listed " + std::to_string(parsed.points.size()) +
                   " innovations. Output only the 5 most prominent ones, numbered 1. to 5.";
    } else {
      correction = "Your previous answer could not be used (" + parsed.problem +
                   "). Follow the mandatory format exactly: a numbered list where every item starts "
                   "with (Classification: <Category Name>).";
    }
  }
  fail(ErrorKind::MalformedOutput, "extraction: unusable innovation list after one retry");
}

QuerySet generate_queries(const std::string &paper_name, const NoveltyPoint &point,
                          const Agents &agents) {
  const auto &t = agents.prompts.get("queries");
  const assets::Vars vars{{"paper_name", paper_name},
                          {"point_num", std::to_string(point.index)},
                          {"innovation_point", point.description}};
  const std::string stage = "queries.p" + std::to_string(point.index);
  std::string correction;
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto queries = parse_numbered_lines(ask(agents, stage, t, {}, vars, correction));
    problem = query_problem(queries, agents.rules.query_count, agents.rules.generation_stop_phrases);
    if (problem.empty()) {
      return {point.index, std::move(queries)};
    }
    correction = "Your previous answer was rejected: " + problem + ". Output exactly " +
                 std::to_string(agents.rules.query_count) +
                 " numbered lines and avoid every term in the AVOID list.";
  }
  fail(ErrorKind::MalformedOutput, stage + ": " + problem);
}

namespace {

// Canonicalises known markers and drops unknown ones, collecting bindings.
std::string bind_markers(const std::string &section, const corpus::DocumentCatalog &catalog,
                         std::vector<report::Citation> &citations,
                         std::vector<std::string> *warnings, int point_index) {
  std::string out;
  std::size_t last = 0;
  for (const auto &m : report::find_markers(section)) {
    out += section.substr(last, m.begin - last);
    last = m.end;
    const corpus::Document *doc = catalog.by_name(m.name);
    if (doc == nullptr) {
      const std::string msg = "analysis.p" + std::to_string(point_index) +
                              ": dropped citation to unknown document '" + m.name + "'";
      log::warn(msg);
      if (warnings != nullptr) {
        warnings->push_back(msg);
      }
      continue;
    }
    citations.push_back({report::sentence_before(section, m.begin), doc->meta.id});
    out += "##" + catalog.name_of(doc->meta.id) + "$$";
  }
  out += section.substr(last);
  // A dropped marker may leave "word ." behind.
  return std::regex_replace(out, std::regex(R"([ \t]+([.,;:!?]))"), "$1");
}

} // namespace

PointAnalysis analyze_point(const std::string &paper_name, const NoveltyPoint &point,
                            const std::vector<retrieval::ContextChunk> &context,
                            const corpus::DocumentCatalog &catalog, const Agents &agents,
                            std::vector<std::string> *warnings) {
  const auto &t = agents.prompts.get("comparison");
  const assets::Vars sys{{"knowledge", format_knowledge(context, catalog)}};
  const assets::Vars user{{"paper_name", paper_name},
                          {"point_num", std::to_string(point.index)},
                          {"innovation_point", point.description}};
  const std::string stage = "analysis.p" + std::to_string(point.index);
  std::string correction;
  ParsedAnalysis parsed;
  for (int attempt = 0; attempt < 2; ++attempt) {
    parsed = parse_analysis(ask(agents, stage, t, sys, user, correction));
    if (parsed.problem.empty()) {
      break;
    }
    if (attempt == 1) {
      fail(ErrorKind::MalformedOutput, stage + ": " + parsed.problem);
    }
    correction = "Your previous answer was rejected (" + parsed.problem +
                 "). Use the subsection headings a) Claimed novelty, b) Similarities, "
                 "c) Unique Differences and, only if applicable, d) Details of Unique Differences.";
  }

  PointAnalysis a;
  a.point = point;
  std::string claimed = parsed.a;
  if (!text::starts_with_ci(claimed, "Classification")) {
    claimed = "Classification: " + std::string(report::to_string(point.classification)) + ". " + claimed;
  }
  a.claimed_novelty = bind_markers(claimed, catalog, a.citations, warnings, point.index);
  if (context.empty()) {
    a.similarities = std::string(kNoSimilarities);
  } else {
    a.similarities = bind_markers(parsed.b, catalog, a.citations, warnings, point.index);
  }
  a.unique_differences = bind_markers(parsed.c, catalog, a.citations, warnings, point.index);
  const bool unique = !text::contains_ci(parsed.c, "no unique differences were identified");
  if (parsed.d && unique) {
    a.details = bind_markers(*parsed.d, catalog, a.citations, warnings, point.index);
  }
  return a;
}

std::string draft_section2(const std::vector<PointAnalysis> &analyses) {
  report::Report r;
  r.analyses = analyses;
  const std::string md = report::render_markdown(r);
  const std::size_t a = md.find(report::kSection2);
  const std::size_t b = md.find(report::kSection3);
  return report::strip_markers(text::trim(md.substr(a, b - a)));
}

std::pair<std::string, int> summarize_novelty(const std::vector<PointAnalysis> &analyses,
                                              const Agents &agents) {
  if (analyses.empty()) {
    return {"The paper states no explicit innovation claims, so no novelty point could be "
            "compared against related work and no genuine contribution can be confirmed.\n\n"
            "Final One-line Summary: 1 – Poor / Insufficient: no author-claimed innovation was "
            "identified to assess.",
            1};
  }
  const auto &t = agents.prompts.get("novelty_summary");
  const assets::Vars vars{{"draft_section2", draft_section2(analyses)}};
  std::string correction;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string out = text::strip_code_fence(ask(agents, "novelty_summary", t, {}, vars, correction));
    const std::size_t h = out.find(report::kSection3);
    if (h != std::string::npos) {
      out = out.substr(h + report::kSection3.size());
    }
    out = text::trim(out);
    if (const auto score = report::parse_score(out); score && !out.empty()) {
      return {out, *score};
    }
    correction = "Your previous answer had no usable score. End with the Final One-line Summary "
                 "starting with an integer rating from 1 to 4.";
  }
  fail(ErrorKind::MalformedOutput, "novelty_summary: no score in {1,2,3,4} after one retry");
}

Report assemble_report(const std::string &paper_name, std::string summary,
                       std::vector<PointAnalysis> analyses, std::pair<std::string, int> novelty,
                       const corpus::DocumentCatalog &catalog) {
  Report r;
  r.paper_name = paper_name;
  r.content_summary = std::move(summary);
  std::map<std::string, int> numbers; // doc id -> numeral
  const auto number_of = [&](const std::string &name) {
    const corpus::Document *doc = catalog.by_name(name);
    const std::string id = doc != nullptr ? doc->meta.id : name;
    const auto [it, inserted] = numbers.emplace(id, static_cast<int>(numbers.size() + 1));
    if (inserted) {
      r.references.push_back({id, doc != nullptr ? catalog.name_of(id) : name});
    }
    return it->second;
  };
  for (auto &a : analyses) {
    a.claimed_novelty = report::rewrite_markers(a.claimed_novelty, number_of);
    a.similarities = report::rewrite_markers(a.similarities, number_of);
    a.unique_differences = report::rewrite_markers(a.unique_differences, number_of);
    if (a.details) {
      a.details = report::rewrite_markers(*a.details, number_of);
    }
  }
  r.analyses = std::move(analyses);
  r.novelty_summary = std::move(novelty.first);
  r.score = novelty.second;
  return r;
}

// --- pipeline ---------------------------------------------------------------------

GenerationResult generate_report(const corpus::Document &target,
                                 const corpus::DocumentCatalog &catalog,
                                 const retrieval::Retriever &retriever,
                                 const ingest::Tokenizer &tokenizer, const Agents &agents,
                                 const GenerationOptions &options) {
  if (target.ingest_status != corpus::IngestStatus::resolved) {
    fail(ErrorKind::InvalidInput, "target paper text is not resolved");
  }
  const std::string paper_name = target.meta.title;
  const std::string paper_text(tokenizer.head(target.cleaned_text, options.target_budget_tokens));

  GenerationResult result;
  std::string summary = summarize_paper(paper_name, paper_text, agents);
  const auto points = extract_novelty_points(paper_name, paper_text, agents);

  std::vector<PointAnalysis> analyses(points.size());
  result.traces.resize(points.size());
  std::vector<std::vector<std::string>> point_warnings(points.size());
  parallel_for(points.size(), options.max_parallel, [&](std::size_t i) {
    PointTrace &trace = result.traces[i];
    trace.queries = generate_queries(paper_name, points[i], agents);
    trace.contexts = retriever.retrieve_for_queries(trace.queries.queries);
    trace.merged = retrieval::union_contexts(trace.contexts, options.context_cap);
    analyses[i] = analyze_point(paper_name, points[i], trace.merged, catalog, agents, &point_warnings[i]);
  });
  for (auto &w : point_warnings) {
    result.warnings.insert(result.warnings.end(), w.begin(), w.end());
  }

  auto novelty = summarize_novelty(analyses, agents);
  result.report = assemble_report(paper_name, std::move(summary), std::move(analyses),
                                  std::move(novelty), catalog);
  result.markdown = report::render_markdown(result.report);
  return result;
}

json trace_to_json(const PointTrace &trace) {
  const auto chunk_json = [](const retrieval::ContextChunk &c) {
    json j{{"chunk_id", c.chunk.chunk_id},
           {"doc_id", c.chunk.doc_id},
           {"sparse_score", c.score.sparse_score},
           {"dense_score", c.score.dense_score}};
    j["fused_score"] = c.score.fused_score ? json(*c.score.fused_score) : json(nullptr);
    j["rerank_score"] = c.score.rerank_score ? json(*c.score.rerank_score) : json(nullptr);
    return j;
  };
  json contexts = json::array();
  for (const auto &ctx : trace.contexts) {
    json chunks = json::array();
    for (const auto &c : ctx.chunks) {
      chunks.push_back(chunk_json(c));
    }
    contexts.push_back({{"query", ctx.query},
                        {"ranked_by", ctx.ranked_by == retrieval::RankSource::reranker ? "reranker" : "fused_fallback"},
                        {"chunks", std::move(chunks)}});
  }
  json merged = json::array();
  for (const auto &c : trace.merged) {
    merged.push_back(chunk_json(c));
  }
  return {{"point_index", trace.queries.point_index},
          {"queries", trace.queries.queries},
          {"contexts", std::move(contexts)},
          {"merged", std::move(merged)}};
}

} // namespace novelty::generation
