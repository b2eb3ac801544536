#include "novelty/assets.hpp"

#include "novelty/error.hpp"
#include "novelty/text.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>

#ifndef NOVELTY_ASSET_DIR
#define NOVELTY_ASSET_DIR "assets"
#endif

namespace novelty::assets {

using nlohmann::json;

std::filesystem::path default_dir() {
  if (const char *env = std::getenv("NOVELTY_ASSET_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return NOVELTY_ASSET_DIR;
}

std::string fill(std::string_view tmpl, const Vars &vars) {
  std::string out(tmpl);
  // Single left-to-right pass so substituted text is never rescanned.
  std::string result;
  result.reserve(out.size());
  std::map<std::string, bool> seen;
  for (const auto &[k, v] : vars) {
    seen[k] = false;
  }
  std::size_t i = 0;
  while (i < out.size()) {
    if (out[i] == '{') {
      const std::size_t close = out.find('}', i + 1);
      if (close != std::string::npos) {
        const std::string key = out.substr(i + 1, close - i - 1);
        const auto it = vars.find(key);
        if (it != vars.end()) {
          result += it->second;
          seen[key] = true;
          i = close + 1;
          continue;
        }
      }
    }
    result += out[i++];
  }
  for (const auto &[k, used] : seen) {
    if (!used) {
      fail(ErrorKind::InvalidInput, "template has no placeholder {" + k + "}");
    }
  }
  return result;
}

PromptLibrary::PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {}

const ChatTemplate &PromptLibrary::get(const std::string &name) const {
  std::lock_guard lock(mutex_);
  if (const auto it = cache_.find(name); it != cache_.end()) {
    return it->second;
  }
  const auto base = dir_ / "prompts";
  ChatTemplate t;
  if (std::filesystem::exists(base / (name + ".txt"))) {
    t.user = text::read_file(base / (name + ".txt"));
  } else {
    t.system = text::read_file(base / (name + ".system.txt"));
    t.user = text::read_file(base / (name + ".user.txt"));
  }
  // Asset files end with a newline that is not part of the prompt.
  for (std::string *s : {&t.system, &t.user}) {
    if (!s->empty() && s->back() == '\n') {
      s->pop_back();
    }
  }
  return cache_.emplace(name, std::move(t)).first->second;
}

Checklist Checklist::load(const std::filesystem::path &path) {
  Checklist c;
  try {
    const json j = json::parse(text::read_file(path));
    for (const auto &d : j.at("dimensions")) {
      Dimension dim;
      dim.name = d.at("name").get<std::string>();
      dim.definition = d.at("definition").get<std::string>();
      dim.conditions = d.value("conditions", "");
      dim.needs_rag = d.at("needs_rag").get<bool>();
      for (const auto &it : d.at("items")) {
        ChecklistItem item;
        item.id = it.at("id").get<std::string>();
        item.dimension = dim.name;
        item.group = it.at("group").get<std::string>();
        item.number = it.at("number").get<int>();
        item.question = it.at("question").get<std::string>();
        if (it.contains("faithfulness_class")) {
          const auto cls = it.at("faithfulness_class").get<std::string>();
          if (cls == "target") {
            item.faithfulness_class = FaithClass::target;
          } else if (cls == "cited") {
            item.faithfulness_class = FaithClass::cited;
          } else {
            fail(ErrorKind::InvalidInput, "unknown faithfulness_class '" + cls + "'");
          }
        }
        dim.items.push_back(std::move(item));
      }
      if (dim.items.empty()) {
        fail(ErrorKind::InvalidInput, "dimension " + dim.name + " has no items");
      }
      c.dims_.push_back(std::move(dim));
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  return c;
}

Checklist Checklist::load_default() { return load(default_dir() / "checklist.json"); }

const Dimension &Checklist::dimension(std::string_view name) const {
  for (const auto &d : dims_) {
    if (d.name == name) {
      return d;
    }
  }
  fail(ErrorKind::MissingDimension, "no checklist dimension named " + std::string(name));
}

std::size_t Checklist::item_count() const {
  std::size_t n = 0;
  for (const auto &d : dims_) {
    n += d.items.size();
  }
  return n;
}

QueryRules QueryRules::load(const std::filesystem::path &path) {
  QueryRules r;
  try {
    const json j = json::parse(text::read_file(path));
    r.query_count = j.at("query_count").get<std::size_t>();
    r.generation_stop_phrases = j.at("generation_stop_phrases").get<std::vector<std::string>>();
    r.evaluation_stop_phrases = j.at("evaluation_stop_phrases").get<std::vector<std::string>>();
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  return r;
}

QueryRules QueryRules::load_default() { return load(default_dir() / "query_rules.json"); }

std::optional<std::string> find_stop_phrase(std::string_view line,
                                            const std::vector<std::string> &phrases) {
  for (const auto &p : phrases) {
    if (text::contains_phrase(line, p)) {
      return p;
    }
  }
  return std::nullopt;
}

std::string report_template() { return text::read_file(default_dir() / "report_template.md"); }

} // namespace novelty::assets
