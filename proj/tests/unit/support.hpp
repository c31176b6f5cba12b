#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "topoterm/corpus.hpp"

namespace topoterm::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("topoterm-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline Utterance make_utterance(const std::string& id, const std::string& text,
                                std::vector<SpanAnnotation> spans = {},
                                Speaker speaker = Speaker::kUser) {
  Utterance u;
  u.utt_id = id;
  u.dialogue_id = "d-" + id;
  u.speaker = speaker;
  u.tokens = split_words(text);
  u.spans = std::move(spans);
  return u;
}

inline SpanAnnotation span(std::size_t start, std::size_t end, std::string value = {},
                           std::string domain = "restaurant") {
  return SpanAnnotation{start, end, std::move(value), std::move(domain), "slot"};
}

}  // namespace topoterm::test
