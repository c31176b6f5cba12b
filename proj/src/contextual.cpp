#include "topoterm/contextual.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "topoterm/error.hpp"

namespace topoterm {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian hosts");

namespace {

constexpr char kMagic[4] = {'T', 'T', 'C', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError(path + ": truncated file");
  return v;
}

}  // namespace

void ContextualStore::add(const std::string& utt_id, std::vector<float> token_major_values) {
  if (token_major_values.size() % dim_ != 0) {
    throw ValidationError("contextual record '" + utt_id + "' is not a multiple of dim " +
                          std::to_string(dim_));
  }
  records_[utt_id] = std::move(token_major_values);
}

std::optional<std::span<const float>> ContextualStore::token(const std::string& utt_id,
                                                             std::size_t index) const {
  auto it = records_.find(utt_id);
  if (it == records_.end() || (index + 1) * dim_ > it->second.size()) return std::nullopt;
  return std::span<const float>(it->second.data() + index * dim_, dim_);
}

void ContextualStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put<std::uint64_t>(out, records_.size());
  for (const auto& [id, values] : records_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(values.size() / dim_));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  }
}

ContextualStore ContextualStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string p = path.string();
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ParseError(p + ": bad magic");
  if (get<std::uint32_t>(in, p) != kVersion) throw ParseError(p + ": unsupported version");
  const auto dim = get<std::uint32_t>(in, p);
  if (dim == 0) throw ParseError(p + ": zero dimension");
  ContextualStore store(dim);
  const auto count = get<std::uint64_t>(in, p);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto len = get<std::uint32_t>(in, p);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw ParseError(p + ": truncated record id");
    const auto tokens = get<std::uint32_t>(in, p);
    std::vector<float> values(static_cast<std::size_t>(tokens) * dim);
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float)))) {
      throw ParseError(p + ": truncated record '" + id + "'");
    }
    store.add(id, std::move(values));
  }
  return store;
}

}  // namespace topoterm
