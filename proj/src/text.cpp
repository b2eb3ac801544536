#include "novelty/text.hpp"

#include "novelty/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace novelty::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_term_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

} // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) {
    ++b;
  }
  while (e > b && is_space(s[e - 1])) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    std::string line(s.substr(start, nl - start));
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (prefix.size() > s.size()) {
    return false;
  }
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (lower(s[i]) != lower(prefix[i])) {
      return false;
    }
  }
  return true;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

std::string fold_title(std::string_view s) { return to_lower(normalize_whitespace(s)); }

std::vector<std::string> terms(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (char c : s) {
    if (is_term_char(c)) {
      current.push_back(lower(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) {
    out.push_back(std::move(current));
  }
  return out;
}

bool contains_phrase(std::string_view haystack, std::string_view phrase) {
  const std::string h = to_lower(haystack);
  const std::string p = to_lower(phrase);
  if (p.empty()) {
    return false;
  }
  std::size_t pos = h.find(p);
  while (pos != std::string::npos) {
    const bool left_ok = pos == 0 || !is_term_char(h[pos - 1]);
    const std::size_t end = pos + p.size();
    const bool right_ok = end >= h.size() || !is_term_char(h[end]);
    if (left_ok && right_ok) {
      return true;
    }
    pos = h.find(p, pos + 1);
  }
  return false;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) {
    return s;
  }
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string strip_code_fence(std::string_view s) {
  std::string t = trim(s);
  if (t.rfind("```", 0) != 0) {
    return t;
  }
  const std::size_t first_nl = t.find('\n');
  if (first_nl == std::string::npos) {
    return t;
  }
  const std::size_t closing = t.rfind("```");
  if (closing == std::string::npos || closing <= first_nl) {
    return trim(std::string_view(t).substr(first_nl + 1));
  }
  return trim(std::string_view(t).substr(first_nl + 1, closing - first_nl - 1));
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path &path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot write " + path.string());
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string safe_filename(std::string_view id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id) {
    const auto u = static_cast<unsigned char>(c);
    out.push_back((std::isalnum(u) != 0 || c == '-' || c == '_' || c == '.') ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") {
    out = "_" + out;
  }
  return out;
}

} // namespace novelty::text
