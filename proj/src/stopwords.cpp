#include "topoterm/stopwords.hpp"

#include <sstream>

namespace topoterm {
namespace detail {
extern const std::string_view kStopwordFile;
}

std::string_view stopword_file_contents() { return detail::kStopwordFile; }

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = [] {
    std::unordered_set<std::string> out;
    std::istringstream in{std::string(detail::kStopwordFile)};
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.insert(line);
    }
    return out;
  }();
  return words;
}

bool is_stopword(std::string_view lowercase_token) {
  return stopwords().contains(std::string(lowercase_token));
}

}  // namespace topoterm
