#include "topoterm/pipeline/config_file.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "topoterm/error.hpp"

namespace topoterm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

class LineParser {
 public:
  LineParser(std::string_view text, std::string where) : s_(text), where_(std::move(where)) {}

  ConfigValue value() {
    skip_ws();
    if (at_end()) fail("missing value");
    ConfigValue v;
    const char c = s_[pos_];
    if (c == '"') {
      v = string();
    } else if (c == '[') {
      v = array();
    } else if (s_.substr(pos_).starts_with("true")) {
      pos_ += 4;
      v = true;
    } else if (s_.substr(pos_).starts_with("false")) {
      pos_ += 5;
      v = false;
    } else {
      v = number();
    }
    skip_ws();
    if (!at_end() && s_[pos_] != '#') fail("unexpected text after value");
    return v;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  void skip_ws() {
    while (!at_end() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(where_ + ": " + msg); }

  std::string string() {
    ++pos_;
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (at_end()) fail("unterminated escape");
      switch (s_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail("unsupported escape sequence");
      }
    }
  }

  std::vector<std::string> array() {
    ++pos_;
    std::vector<std::string> out;
    skip_ws();
    if (!at_end() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      if (at_end() || s_[pos_] != '"') fail("arrays may only hold strings");
      out.push_back(string());
      skip_ws();
      if (at_end()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (!at_end() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail("expected ',' or ']' in array");
    }
  }

  ConfigValue number() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ' ' && s_[end] != '\t' && s_[end] != '#') ++end;
    std::string tok;
    for (char c : s_.substr(pos_, end - pos_)) {
      if (c != '_') tok += c;
    }
    pos_ = end;
    const bool looks_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" ||
                             tok == "+inf" || tok == "nan";
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (!looks_float) {
      std::int64_t i = 0;
      if (*b == '+') ++b;
      auto [p, ec] = std::from_chars(b, e, i);
      if (ec == std::errc() && p == e) return i;
      fail("bad value '" + tok + "'");
    }
    double d = 0.0;
    if (*b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, d);
    if (ec != std::errc() || p != e) fail("bad value '" + tok + "'");
    return d;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::string where_;
};

}  // namespace

ConfigDocument ConfigDocument::parse(std::string_view text, const std::string& source) {
  ConfigDocument doc;
  doc.source_ = source;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw ParseError(where + ": unterminated section header");
      const auto rest = trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') throw ParseError(where + ": text after section header");
      const auto name = trim(line.substr(1, close - 1));
      if (!bare_key(name)) throw ParseError(where + ": bad section name '" + std::string(name) + "'");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(where + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (!bare_key(key)) throw ParseError(where + ": bad key '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (doc.values_.contains(full)) throw ParseError(where + ": duplicate key '" + full + "'");
    doc.values_[full] = LineParser(line.substr(eq + 1), where).value();
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

namespace {

template <typename T>
std::optional<T> typed(const std::map<std::string, ConfigValue>& values, std::map<std::string, bool>& read,
                       const std::string& key, const std::string& source, const char* type_name) {
  auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  read[key] = true;
  if (const T* v = std::get_if<T>(&it->second)) return *v;
  throw ValidationError(source + ": '" + key + "' must be " + type_name);
}

}  // namespace

std::optional<std::string> ConfigDocument::get_string(const std::string& key) const {
  return typed<std::string>(values_, read_, key, source_, "a string");
}
std::optional<std::int64_t> ConfigDocument::get_int(const std::string& key) const {
  return typed<std::int64_t>(values_, read_, key, source_, "an integer");
}
std::optional<double> ConfigDocument::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it != values_.end()) {
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) {
      read_[key] = true;
      return static_cast<double>(*i);
    }
  }
  return typed<double>(values_, read_, key, source_, "a number");
}
std::optional<bool> ConfigDocument::get_bool(const std::string& key) const {
  return typed<bool>(values_, read_, key, source_, "a boolean");
}
std::optional<std::vector<std::string>> ConfigDocument::get_strings(const std::string& key) const {
  return typed<std::vector<std::string>>(values_, read_, key, source_, "an array of strings");
}

std::vector<std::string> ConfigDocument::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!read_.contains(k)) out.push_back(k);
  }
  return out;
}

}  // namespace topoterm
