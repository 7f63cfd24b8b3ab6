#include "gpode/config_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gpode {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw std::runtime_error("toml line " + std::to_string(line) + ": " + what);
}

// Removes a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (quote == 0 && (s[i] == '"' || s[i] == '\'')) {
      quote = s[i];
    } else if (quote != 0 && s[i] == quote && (quote == '\'' || s[i - 1] != '\\')) {
      quote = 0;
    } else if (s[i] == '#' && quote == 0) {
      return s.substr(0, i);
    }
  }
  return s;
}

nlohmann::json parse_scalar(std::string_view v, std::size_t line) {
  v = trim(v);
  if (v.empty()) {
    fail(line, "missing value");
  }
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') {
      fail(line, "unterminated string");
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char c = v[++i];
        out.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
      } else {
        out.push_back(v[i]);
      }
    }
    return out;
  }
  if (v.front() == '\'') {
    // Literal string: no escapes.
    if (v.size() < 2 || v.back() != '\'') {
      fail(line, "unterminated string");
    }
    return std::string(v.substr(1, v.size() - 2));
  }
  if (v == "true") return true;
  if (v == "false") return false;

  std::string digits;
  for (char c : v) {
    if (c != '_') digits.push_back(c);
  }
  const bool integral = digits.find_first_of(".eE") == std::string::npos && digits != "inf" && digits != "nan";
  if (integral) {
    long long i = 0;
    auto [ptr, ec] = std::from_chars(digits.data() + (digits.front() == '+' ? 1 : 0), digits.data() + digits.size(), i);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      return i;
    }
  } else {
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(digits.data() + (digits.front() == '+' ? 1 : 0), digits.data() + digits.size(), d);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      return d;
    }
  }
  fail(line, "cannot parse value '" + std::string(v) + "'");
}

nlohmann::json parse_value(std::string_view v, std::size_t line) {
  v = trim(v);
  if (v.empty() || v.front() != '[') {
    return parse_scalar(v, line);
  }
  if (v.back() != ']') {
    fail(line, "arrays must be on a single line");
  }
  nlohmann::json arr = nlohmann::json::array();
  std::string_view body = trim(v.substr(1, v.size() - 2));
  char quote = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i < body.size() && (body[i] == '"' || body[i] == '\'')) {
      quote = quote == 0 ? body[i] : quote == body[i] ? 0 : quote;
    }
    if (i == body.size() || (body[i] == ',' && quote == 0)) {
      const auto item = trim(body.substr(start, i - start));
      if (!item.empty()) {
        arr.push_back(parse_scalar(item, line));
      }
      start = i + 1;
    }
  }
  return arr;
}

}  // namespace

nlohmann::json parse_toml_subset(std::string_view text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const auto raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    const auto line = trim(strip_comment(raw));
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        fail(line_no, "malformed table header");
      }
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (name.find('.') != std::string::npos || name.front() == '[') {
        fail(line_no, "nested tables are not supported");
      }
      table = &root[name];
      if (!table->is_object()) {
        *table = nlohmann::json::object();
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(line_no, "expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') {
      key = key.substr(1, key.size() - 2);
    }
    if (key.empty()) {
      fail(line_no, "empty key");
    }
    if (table->contains(key)) {
      fail(line_no, "duplicate key '" + key + "'");
    }
    (*table)[key] = parse_value(line.substr(eq + 1), line_no);
  }
  return root;
}

nlohmann::json load_structured_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.extension() == ".toml") {
    return parse_toml_subset(text);
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace gpode
