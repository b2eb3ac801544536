#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace novelty::assets {

// NOVELTY_ASSET_DIR from the environment, else the compiled-in source path.
std::filesystem::path default_dir();

using Vars = std::map<std::string, std::string>;

// Substitutes `{name}` for every key in `vars`. Braces that do not name a
// supplied key are left alone (several templates embed literal JSON). Every
// key must occur in the template, otherwise InvalidInput.
std::string fill(std::string_view tmpl, const Vars &vars);

struct ChatTemplate {
  std::string system; // empty for single-message prompts
  std::string user;
};

// Prompt files under <dir>/prompts: "<name>.txt", or "<name>.system.txt" +
// "<name>.user.txt" for two-message prompts.
class PromptLibrary {
public:
  explicit PromptLibrary(std::filesystem::path dir = default_dir());
  const ChatTemplate &get(const std::string &name) const;
  const std::filesystem::path &dir() const { return dir_; }

private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, ChatTemplate> cache_;
};

enum class FaithClass { target, cited };

struct ChecklistItem {
  std::string id;
  std::string dimension;
  std::string group;
  int number = 0; // position within its group, 1-based
  std::string question;
  std::optional<FaithClass> faithfulness_class;
};

struct Dimension {
  std::string name;
  std::string definition;
  std::string conditions;
  bool needs_rag = false;
  std::vector<ChecklistItem> items;
};

class Checklist {
public:
  static Checklist load(const std::filesystem::path &path);
  static Checklist load_default();

  const std::vector<Dimension> &dimensions() const { return dims_; }
  const Dimension &dimension(std::string_view name) const;
  std::size_t item_count() const;

private:
  std::vector<Dimension> dims_;
};

struct QueryRules {
  std::size_t query_count = 6;
  std::vector<std::string> generation_stop_phrases;
  std::vector<std::string> evaluation_stop_phrases;

  static QueryRules load(const std::filesystem::path &path);
  static QueryRules load_default();
};

// First stop phrase occurring as a whole-word, case-insensitive match.
std::optional<std::string> find_stop_phrase(std::string_view line,
                                            const std::vector<std::string> &phrases);

std::string report_template();

} // namespace novelty::assets
