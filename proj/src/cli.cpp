#include "novelty/cli.hpp"

#include "novelty/assets.hpp"
#include "novelty/corpus.hpp"
#include "novelty/gateway.hpp"
#include "novelty/generation.hpp"
#include "novelty/ingest.hpp"
#include "novelty/log.hpp"
#include "novelty/report.hpp"
#include "novelty/retrieval.hpp"
#include "novelty/text.hpp"
#include "novelty/validation.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <memory>

namespace novelty::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::InvalidConfig:
    return kUsage;
  case ErrorKind::CapacityTooSmall:
    return kCapacity;
  case ErrorKind::TargetNotFound:
    return kTargetNotFound;
  case ErrorKind::ProviderUnavailable:
    return kProviderUnavailable;
  case ErrorKind::MalformedOutput:
    return kMalformedOutput;
  case ErrorKind::StructureViolation:
    return kStructureViolation;
  case ErrorKind::BudgetExceeded:
    return kBudgetExceeded;
  case ErrorKind::EmptyDocument:
  case ErrorKind::EmptyCorpus:
  case ErrorKind::DimensionMismatch:
  case ErrorKind::EmptyAnswers:
  case ErrorKind::MissingDimension:
  case ErrorKind::MissingClassAnnotations:
  case ErrorKind::IncompleteMatrix:
  case ErrorKind::InvalidInput:
    return kInvalidInput;
  case ErrorKind::Io:
    return kFailure;
  }
  return kFailure;
}

config::RunConfig apply_overrides(config::RunConfig c, const Overrides &o) {
  if (o.offline_dir) {
    c.offline_dir = *o.offline_dir;
  }
  if (o.capacity) {
    c.capacity = *o.capacity;
  }
  if (o.k_final) {
    c.k_final = *o.k_final;
  }
  if (o.fail_closed) {
    c.fail_closed = *o.fail_closed;
  }
  if (o.run_dir) {
    c.run_dir = *o.run_dir;
  }
  c.validate();
  return c;
}

namespace {

// Providers and assets shared by the model-facing commands.
struct Runtime {
  std::shared_ptr<const ingest::Tokenizer> tokenizer = std::make_shared<ingest::WordPunctTokenizer>();
  std::unique_ptr<gateway::Gateway> gw;
  retrieval::HashingEmbedder hashing;
  retrieval::LexicalReranker lexical;
  EmbeddingProvider *embedder = nullptr;
  RerankProvider *reranker = nullptr;
  std::unique_ptr<assets::PromptLibrary> prompts;
  assets::Checklist checklist;
  assets::QueryRules rules;

  Runtime(const config::RunConfig &c, const std::optional<fs::path> &mock) : hashing(c.hashing_dim) {
    gateway::GatewayConfig gc = c.gateway;
    if (const char *key = std::getenv(c.api_key_env.c_str()); key != nullptr) {
      gc.api_key = key;
    }
    std::shared_ptr<http::Client> client;
    const auto http_client = [&] {
      if (!client) {
        client = http::make_client();
      }
      return client;
    };
    std::shared_ptr<gateway::ChatBackend> chat;
    if (mock) {
      chat = gateway::ReplayChatBackend::from_file(*mock);
    } else {
      chat = std::make_shared<gateway::HttpChatBackend>(gc, http_client());
    }
    std::shared_ptr<gateway::EmbedBackend> embed;
    if (c.embedder == "http") {
      embed = std::make_shared<gateway::HttpEmbedBackend>(gc, http_client());
    }
    std::shared_ptr<gateway::RerankBackend> rerank;
    if (c.reranker == "http") {
      rerank = std::make_shared<gateway::HttpRerankBackend>(gc, http_client());
    }
    gw = std::make_unique<gateway::Gateway>(gc, chat, embed, rerank, tokenizer);
    embedder = c.embedder == "http" ? static_cast<EmbeddingProvider *>(gw.get()) : &hashing;
    if (c.reranker == "http") {
      reranker = gw.get();
    } else if (c.reranker == "lexical") {
      reranker = &lexical;
    }
    const fs::path dir = c.asset_dir.empty() ? assets::default_dir() : c.asset_dir;
    prompts = std::make_unique<assets::PromptLibrary>(dir);
    checklist = assets::Checklist::load(dir / "checklist.json");
    rules = assets::QueryRules::load(dir / "query_rules.json");
    rules.query_count = c.query_count;
  }

  void save_transcript(const fs::path &path) const {
    try {
      gw->transcript().write_jsonl(path);
    } catch (const std::exception &e) {
      log::error("could not write transcript " + path.string() + ": " + e.what());
    }
  }
};

retrieval::RetrievalParams retrieval_params(const config::RunConfig &c) {
  retrieval::RetrievalParams p;
  p.n_recall = c.n_recall;
  p.weight = c.fusion_weight;
  p.k_final = c.k_final;
  p.rerank_fallback = c.rerank_fallback;
  p.max_parallel = c.max_parallel;
  return p;
}

void write_json(const fs::path &path, const json &j) { text::write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path &path) {
  try {
    return json::parse(text::read_file(path));
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

// Runs `body`, saving the transcript whether or not it succeeds.
template <typename Fn> json with_transcript(Runtime &rt, const fs::path &path, Fn &&body) {
  try {
    json out = body();
    rt.save_transcript(path);
    return out;
  } catch (...) {
    rt.save_transcript(path);
    throw;
  }
}

struct LoadedPaper {
  corpus::LoadedCorpus corpus;
  corpus::DocumentCatalog catalog;
};

LoadedPaper load_paper(const PaperDir &paper) {
  if (!fs::exists(paper.corpus() / "manifest.json")) {
    fail(ErrorKind::InvalidInput, "no corpus at " + paper.corpus().string() + " (run build-db first)");
  }
  LoadedPaper p;
  p.corpus = corpus::load_corpus(paper.corpus());
  p.catalog = corpus::DocumentCatalog(p.corpus.manifest, p.corpus.documents);
  return p;
}

retrieval::Retriever load_retriever(const PaperDir &paper, const config::RunConfig &c, Runtime &rt) {
  const fs::path meta_path = paper.indexes() / "meta.json";
  if (!fs::exists(meta_path)) {
    fail(ErrorKind::InvalidInput, "no indexes at " + paper.indexes().string() + " (run build-db first)");
  }
  const json meta = read_json(meta_path);
  const std::string built_with = meta.value("embedder", "");
  if (built_with != c.embedder) {
    fail(ErrorKind::InvalidConfig,
         "indexes were built with embedder '" + built_with + "', config says '" + c.embedder + "'");
  }
  auto chunks = ingest::read_chunks(paper.indexes() / "chunks.jsonl");
  if (chunks.empty()) {
    return retrieval::Retriever({}, std::nullopt, std::nullopt, *rt.embedder, rt.reranker, retrieval_params(c));
  }
  auto sparse = retrieval::SparseIndex::from_json(read_json(paper.indexes() / "sparse.json"));
  auto dense = retrieval::DenseIndex::load(paper.indexes());
  return retrieval::Retriever(std::move(chunks), std::move(sparse), std::move(dense), *rt.embedder,
                              rt.reranker, retrieval_params(c));
}

std::unique_ptr<corpus::ScholarlyProvider> scholarly_provider(const config::RunConfig &c) {
  if (!c.offline_dir.empty()) {
    return std::make_unique<corpus::OfflineScholarlyProvider>(c.offline_dir);
  }
  const char *key = std::getenv(c.scholarly_api_key_env.c_str());
  return std::make_unique<corpus::HttpScholarlyProvider>(c.scholarly_base_url, http::make_client(),
                                                         key != nullptr ? key : "");
}

fs::path text_dir(const config::RunConfig &c) {
  if (!c.text_dir.empty()) {
    return c.text_dir;
  }
  if (!c.offline_dir.empty()) {
    return c.offline_dir / "texts";
  }
  fail(ErrorKind::InvalidConfig, "text_dir must be set when no offline_dir is configured");
}

} // namespace

// --- commands ---------------------------------------------------------------------

json cmd_build_db(const std::string &title_or_id, const config::RunConfig &c,
                  const std::optional<fs::path> &mock_transcript) {
  auto provider = scholarly_provider(c);
  const corpus::PaperMeta target = provider->resolve(title_or_id);
  auto refs = corpus::fetch_reference_set(target, *provider);
  const std::size_t first_count = refs.first_order.size();
  const std::size_t second_count = refs.second_order.size();
  const corpus::CorpusManifest manifest =
      corpus::rank_and_truncate(target, std::move(refs.first_order), std::move(refs.second_order), c.capacity);

  const PaperDir paper{c.run_dir / text::safe_filename(target.id)};
  corpus::DirectoryTextSource source(text_dir(c));
  const corpus::Document target_doc = corpus::resolve_document(manifest.target, source);
  auto documents = corpus::resolve_full_texts(manifest, source, c.max_parallel);
  corpus::save_corpus(paper.corpus(), manifest, target_doc, documents);

  json status{{"resolved", 0}, {"text_missing", 0}, {"extraction_failed", 0}};
  for (const auto &d : documents) {
    status[std::string(corpus::to_string(d.ingest_status))] = status[std::string(corpus::to_string(d.ingest_status))].get<int>() + 1;
  }

  Runtime rt(c, mock_transcript);
  const corpus::DocumentCatalog catalog(manifest, std::move(documents));
  const auto chunks = ingest::chunk_corpus(catalog.indexable(), *rt.tokenizer, c.chunk_tokens, c.max_parallel);
  fs::create_directories(paper.indexes());
  ingest::write_chunks(paper.indexes() / "chunks.jsonl", chunks);
  std::size_t dim = 0;
  if (!chunks.empty()) {
    write_json(paper.indexes() / "sparse.json", retrieval::SparseIndex::build(chunks).to_json());
    const auto dense = retrieval::DenseIndex::build(chunks, *rt.embedder);
    dense.save(paper.indexes());
    dim = dense.dim();
  }
  write_json(paper.indexes() / "meta.json", {{"embedder", c.embedder},
                                              {"dim", dim},
                                              {"chunk_tokens", c.chunk_tokens},
                                              {"chunk_count", chunks.size()}});
  if (c.embedder == "http") {
    rt.save_transcript(paper.transcripts() / "build_db.jsonl");
  }

  json summary{{"target_id", target.id},
               {"title", target.title},
               {"paper_dir", paper.root.string()},
               {"first_order", first_count},
               {"second_order_candidates", second_count},
               {"entries", manifest.entries.size()},
               {"capacity", manifest.capacity},
               {"ingest", status},
               {"target_ingest", corpus::to_string(target_doc.ingest_status)},
               {"chunks", chunks.size()}};
  write_json(paper.corpus() / "summary.json", summary);
  if (target_doc.ingest_status != corpus::IngestStatus::resolved) {
    fail(ErrorKind::EmptyDocument, "target paper text unavailable: " + target.id);
  }
  return summary;
}

json cmd_generate(const PaperDir &paper, const config::RunConfig &c,
                  const std::optional<fs::path> &mock_transcript) {
  const LoadedPaper lp = load_paper(paper);
  Runtime rt(c, mock_transcript);
  const retrieval::Retriever retriever = load_retriever(paper, c, rt);
  return with_transcript(rt, paper.transcripts() / "generate.jsonl", [&] {
    const generation::Agents agents{*rt.gw, *rt.prompts, rt.rules};
    generation::GenerationOptions opts;
    opts.target_budget_tokens = c.target_budget_tokens;
    opts.context_cap = c.context_cap;
    opts.max_parallel = c.max_parallel;
    const auto result = generation::generate_report(lp.corpus.target, lp.catalog, retriever, *rt.tokenizer,
                                                    agents, opts);
    text::write_file(paper.reports() / "report.md", result.markdown);
    write_json(paper.reports() / "report.json", report::to_json(result.report));
    json traces = json::array();
    for (const auto &t : result.traces) {
      traces.push_back(generation::trace_to_json(t));
    }
    write_json(paper.reports() / "traces.json", traces);

    const auto violations = report::structure_violations(result.markdown);
    json summary{{"report", (paper.reports() / "report.md").string()},
                 {"points", result.report.analyses.size()},
                 {"score", result.report.score},
                 {"references", result.report.references.size()},
                 {"warnings", result.warnings},
                 {"structure_violations", violations}};
    write_json(paper.reports() / "summary.json", summary);
    if (!violations.empty()) {
      fail(ErrorKind::StructureViolation, "generated report breaks the format: " + violations.front());
    }
    return summary;
  });
}

json cmd_validate(const PaperDir &paper, const config::RunConfig &c, const std::optional<fs::path> &report,
                  const std::optional<fs::path> &mock_transcript) {
  const LoadedPaper lp = load_paper(paper);
  const fs::path input = report.value_or(paper.reports() / "report.md");
  const std::string markdown = text::read_file(input);
  Runtime rt(c, mock_transcript);
  return with_transcript(rt, paper.transcripts() / "validate.jsonl", [&] {
    const validation::Agents agents{*rt.gw, *rt.prompts};
    validation::ValidationOptions opts;
    opts.fail_closed = c.fail_closed;
    opts.source_budget_tokens = c.source_budget_tokens;
    opts.max_parallel = c.max_parallel;
    opts.polish = c.polish;
    const auto r = validation::validate_report(markdown, lp.catalog, *rt.tokenizer, agents, opts);
    write_json(paper.validation() / "claims.json", validation::claims_artifact(r));
    write_json(paper.validation() / "verdicts.json", validation::verdicts_artifact(r));
    write_json(paper.validation() / "corrections.json", validation::corrections_artifact(r));
    text::write_file(paper.validation() / "corrected.md", r.corrected);
    text::write_file(paper.validation() / "report.md", r.output);
    const auto counts = validation::count_verdicts(validation::verdicts_artifact(r));
    json summary{{"input", input.string()},
                 {"report", (paper.validation() / "report.md").string()},
                 {"claims_extracted", r.extracted.size()},
                 {"claims_verified", counts.claims},
                 {"incorrect", counts.incorrect},
                 {"changed_lines", r.correction_diff.size()},
                 {"polish_applied", r.polish.applied},
                 {"warnings", r.warnings}};
    write_json(paper.validation() / "summary.json", summary);
    return summary;
  });
}

json cmd_evaluate(const PaperDir &paper, const config::RunConfig &c, const std::optional<fs::path> &report,
                  const std::optional<fs::path> &mock_transcript) {
  const LoadedPaper lp = load_paper(paper);
  fs::path input;
  if (report) {
    input = *report;
  } else if (fs::exists(paper.validation() / "report.md")) {
    input = paper.validation() / "report.md";
  } else {
    input = paper.reports() / "report.md";
  }
  const std::string markdown = text::read_file(input);
  std::optional<validation::VerdictCounts> verdicts;
  if (fs::exists(paper.validation() / "verdicts.json")) {
    verdicts = validation::count_verdicts(read_json(paper.validation() / "verdicts.json"));
  }
  Runtime rt(c, mock_transcript);
  const retrieval::Retriever retriever = load_retriever(paper, c, rt);
  return with_transcript(rt, paper.transcripts() / "evaluate.jsonl", [&] {
    const evaluation::Agents agents{*rt.gw, *rt.prompts, rt.rules};
    evaluation::EvaluationOptions opts;
    opts.report_budget_tokens = c.report_budget_tokens;
    opts.target_budget_tokens = c.target_budget_tokens;
    opts.context_cap = c.context_cap;
    const auto result = evaluation::evaluate_report(lp.corpus.target.meta.id, markdown, lp.corpus.target,
                                                    lp.catalog, &retriever, *rt.tokenizer, rt.checklist,
                                                    agents, verdicts, opts);
    json out = evaluation::to_json(result);
    out["report"] = input.string();
    write_json(paper.eval() / "result.json", out);
    json summary{{"report", input.string()}, {"overall", result.overall}, {"metrics", out["metrics"]}};
    json dims = json::object();
    for (const auto &d : result.dimensions) {
      dims[d.score.dimension] = d.score.score;
    }
    summary["dimensions"] = dims;
    write_json(paper.eval() / "summary.json", summary);
    return summary;
  });
}

json cmd_cross_validate(const fs::path &matrix, evaluation::Strategy strategy,
                        const std::optional<fs::path> &out) {
  const auto m = evaluation::load_matrix(matrix);
  json table = evaluation::to_json(evaluation::cross_validate(m, strategy), strategy);
  table["papers"] = m.papers.size();
  if (out) {
    write_json(*out, table);
  }
  return table;
}

json cmd_aggregate(const std::vector<fs::path> &results, const std::optional<fs::path> &out) {
  std::vector<evaluation::EvaluationResult> rs;
  for (const auto &p : results) {
    rs.push_back(evaluation::evaluation_from_json(read_json(p)));
  }
  json j = evaluation::to_json(evaluation::aggregate_results(rs));
  if (out) {
    write_json(*out, j);
  }
  return j;
}

// --- argument parsing --------------------------------------------------------------

namespace {

PaperDir paper_dir_for(const std::string &arg, const config::RunConfig &c) {
  if (fs::is_directory(fs::path(arg) / "corpus")) {
    return PaperDir{arg};
  }
  return PaperDir{c.run_dir / text::safe_filename(arg)};
}

} // namespace

int run(int argc, char **argv) {
  CLI::App app{"Novelty report engine: literature database, report generation, self-validation and "
               "checklist evaluation."};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::string offline_dir, mock, run_dir;
  std::size_t capacity = 0, k_final = 0;
  bool fail_closed = false;
  app.add_option("--config", config_path, "Run configuration (key = value file)");
  app.add_option("--offline-dir", offline_dir, "Directory with metadata.json and texts/ (no network)");
  app.add_option("--capacity", capacity, "Literature database capacity");
  app.add_option("--k-final", k_final, "Chunks kept per query after reranking");
  app.add_option("--mock-transcript", mock, "Replay model responses from a JSON-lines transcript");
  app.add_flag("--fail-closed", fail_closed, "Treat missing verification verdicts as errors");
  app.add_option("--run-dir", run_dir, "Root of the per-paper output trees");
  app.fallthrough();

  std::string target;
  auto *build = app.add_subcommand("build-db", "Build the literature database and indexes for a paper");
  build->add_option("target", target, "Title or provider id of the paper")->required();

  std::string paper_arg;
  std::string report_path;
  auto *gen = app.add_subcommand("generate", "Generate the novelty report");
  gen->add_option("paper", paper_arg, "Paper directory or target id")->required();

  auto *val = app.add_subcommand("validate", "Validate and correct a report's citations");
  val->add_option("paper", paper_arg, "Paper directory or target id")->required();
  val->add_option("--report", report_path, "Report to validate (default: reports/report.md)");

  auto *ev = app.add_subcommand("evaluate", "Score a report against the checklist");
  ev->add_option("paper", paper_arg, "Paper directory or target id")->required();
  ev->add_option("--report", report_path, "Report to evaluate");

  std::string matrix, strategy = "leave_one_out", out_path;
  auto *cv = app.add_subcommand("cross-validate", "MAE/MSE of each evaluator model against consensus");
  cv->add_option("matrix", matrix, "Score matrix (.csv or .json)")->required()->check(CLI::ExistingFile);
  cv->add_option("--strategy", strategy, "leave_one_out or all_models")
      ->check(CLI::IsMember({"leave_one_out", "all_models"}));
  cv->add_option("--out", out_path, "Write the table to this file");

  std::vector<std::string> result_files;
  auto *agg = app.add_subcommand("aggregate", "Macro and micro averages over evaluation results");
  agg->add_option("results", result_files, "eval/result.json files")->required()->check(CLI::ExistingFile);
  agg->add_option("--out", out_path, "Write the aggregate to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (cv->parsed()) {
      const auto s = strategy == "all_models" ? evaluation::Strategy::all_models
                                              : evaluation::Strategy::leave_one_out;
      std::cout << cmd_cross_validate(matrix, s, out_path.empty() ? std::nullopt : std::optional<fs::path>(out_path))
                       .dump(2)
                << "\n";
      return kOk;
    }
    if (agg->parsed()) {
      std::vector<fs::path> files(result_files.begin(), result_files.end());
      std::cout << cmd_aggregate(files, out_path.empty() ? std::nullopt : std::optional<fs::path>(out_path)).dump(2)
                << "\n";
      return kOk;
    }

    if (config_path.empty() || !fs::is_regular_file(config_path)) {
      std::cerr << (config_path.empty() ? "missing --config" : "config file not found: " + config_path) << "\n\n"
                << app.help();
      return kUsage;
    }
    if (!offline_dir.empty()) {
      ov.offline_dir = offline_dir;
    }
    if (app.count("--capacity") > 0) {
      ov.capacity = capacity;
    }
    if (app.count("--k-final") > 0) {
      ov.k_final = k_final;
    }
    if (fail_closed) {
      ov.fail_closed = true;
    }
    if (!run_dir.empty()) {
      ov.run_dir = run_dir;
    }
    const std::optional<fs::path> transcript = mock.empty() ? std::nullopt : std::optional<fs::path>(mock);
    const config::RunConfig cfg = apply_overrides(config::load_config(config_path), ov);

    json summary;
    if (build->parsed()) {
      summary = cmd_build_db(target, cfg, transcript);
    } else if (gen->parsed()) {
      summary = cmd_generate(paper_dir_for(paper_arg, cfg), cfg, transcript);
    } else if (val->parsed()) {
      const auto rp = report_path.empty() ? std::nullopt : std::optional<fs::path>(report_path);
      summary = cmd_validate(paper_dir_for(paper_arg, cfg), cfg, rp, transcript);
    } else if (ev->parsed()) {
      const auto rp = report_path.empty() ? std::nullopt : std::optional<fs::path>(report_path);
      summary = cmd_evaluate(paper_dir_for(paper_arg, cfg), cfg, rp, transcript);
    }
    std::cout << summary.dump(2) << "\n";
    return kOk;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

} // namespace novelty::cli
