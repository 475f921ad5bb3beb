#include "gapdx/hash.h"

#include <openssl/evp.h>

#include <memory>
#include <vector>

#include "gapdx/errors.h"
#include "gapdx/jsonl.h"
#include "gapdx/text_util.h"

namespace gapdx {

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw IoError("sha256 computation failed");
  }
  return text::HexEncode(std::string_view(reinterpret_cast<const char*>(digest), length));
}

std::string Sha256File(const std::filesystem::path& path) {
  return Sha256Hex(ReadTextFile(path));
}

std::string Base64Encode(std::string_view data) {
  std::vector<unsigned char> out(4 * ((data.size() + 2) / 3) + 1);
  const int n = EVP_EncodeBlock(out.data(), reinterpret_cast<const unsigned char*>(data.data()),
                                static_cast<int>(data.size()));
  return std::string(reinterpret_cast<const char*>(out.data()), static_cast<std::size_t>(n));
}

}  // namespace gapdx
