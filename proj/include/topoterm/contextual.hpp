#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace topoterm {

inline constexpr std::size_t kContextualDim = 768;

// Frozen per-token contextual vectors keyed by (utt_id, token_index).
//
// Binary layout, little-endian:
//   "TTCE" | u32 version=1 | u32 dim | u64 record count
//   per record: u32 id length | id bytes | u32 token count | count*dim f32
class ContextualStore {
 public:
  explicit ContextualStore(std::size_t dim = kContextualDim) : dim_(dim) {}

  void add(const std::string& utt_id, std::vector<float> token_major_values);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  std::optional<std::span<const float>> token(const std::string& utt_id, std::size_t index) const;

  void save(const std::filesystem::path& path) const;
  static ContextualStore load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::map<std::string, std::vector<float>> records_;
};

}  // namespace topoterm
