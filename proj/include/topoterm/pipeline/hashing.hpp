#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace topoterm {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Incremental SHA-256 over several labeled parts.
class ContentHasher {
 public:
  ContentHasher();
  ~ContentHasher();
  ContentHasher(const ContentHasher&) = delete;
  ContentHasher& operator=(const ContentHasher&) = delete;

  // Each part is length-prefixed so that ("ab","c") and ("a","bc") differ.
  ContentHasher& add(std::string_view part);
  ContentHasher& add_file(const std::filesystem::path& path);
  std::string hex() const;

 private:
  void* ctx_;
};

}  // namespace topoterm
