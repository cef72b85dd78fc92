#include "discom/server/credentials.hpp"

#include <sodium.h>

#include <stdexcept>

#include "discom/error.hpp"

namespace discom::server {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium failed to initialise");
}

}  // namespace

std::string hash_secret(std::string_view secret, HashStrength strength) {
  ensure_sodium();
  auto ops = strength == HashStrength::Minimum ? crypto_pwhash_OPSLIMIT_MIN : crypto_pwhash_OPSLIMIT_INTERACTIVE;
  auto mem = strength == HashStrength::Minimum ? crypto_pwhash_MEMLIMIT_MIN : crypto_pwhash_MEMLIMIT_INTERACTIVE;
  char out[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(out, secret.data(), secret.size(), ops, mem) != 0)
    throw std::runtime_error("credential hashing ran out of memory");
  return out;
}

bool verify_secret(const std::string& digest, std::string_view secret) {
  ensure_sodium();
  if (digest.empty()) return false;
  return crypto_pwhash_str_verify(digest.c_str(), secret.data(), secret.size()) == 0;
}

std::string random_token() {
  ensure_sodium();
  unsigned char raw[32];
  randombytes_buf(raw, sizeof raw);
  char hex[sizeof raw * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, raw, sizeof raw);
  return hex;
}

}  // namespace discom::server
