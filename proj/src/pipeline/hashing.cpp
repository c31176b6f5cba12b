#include "topoterm/pipeline/hashing.hpp"

#include <array>
#include <fstream>

#include <openssl/evp.h>

#include "topoterm/error.hpp"

namespace topoterm {

namespace {

EVP_MD_CTX* md(void* p) { return static_cast<EVP_MD_CTX*>(p); }

std::string to_hex(const unsigned char* digest, unsigned len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

void update_file(EVP_MD_CTX* ctx, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string() + " for hashing");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
}

}  // namespace

ContentHasher::ContentHasher() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(md(ctx_), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 initialization failed");
  }
}

ContentHasher::~ContentHasher() { EVP_MD_CTX_free(md(ctx_)); }

ContentHasher& ContentHasher::add(std::string_view part) {
  const std::string len = std::to_string(part.size()) + ":";
  EVP_DigestUpdate(md(ctx_), len.data(), len.size());
  EVP_DigestUpdate(md(ctx_), part.data(), part.size());
  return *this;
}

ContentHasher& ContentHasher::add_file(const std::filesystem::path& path) {
  return add(sha256_file(path));
}

std::string ContentHasher::hex() const {
  // Finalize a copy so that more parts can still be added afterwards.
  EVP_MD_CTX* copy = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  const bool ok = copy != nullptr && EVP_MD_CTX_copy_ex(copy, md(ctx_)) == 1 &&
                  EVP_DigestFinal_ex(copy, digest, &len) == 1;
  EVP_MD_CTX_free(copy);
  if (!ok) throw Error("SHA-256 finalization failed");
  return to_hex(digest, len);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  return to_hex(digest, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 initialization failed");
  try {
    update_file(ctx, path);
  } catch (...) {
    EVP_MD_CTX_free(ctx);
    throw;
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  return to_hex(digest, len);
}

}  // namespace topoterm
