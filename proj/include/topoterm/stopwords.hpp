#pragma once

#include <string>
#include <string_view>
#include <unordered_set>

namespace topoterm {

// Contents of data/stopwords.txt, embedded at build time.
std::string_view stopword_file_contents();

const std::unordered_set<std::string>& stopwords();

bool is_stopword(std::string_view lowercase_token);

}  // namespace topoterm
