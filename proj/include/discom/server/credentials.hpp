#pragma once

#include <string>
#include <string_view>

namespace discom::server {

/// Cost of the password hash. Interactive is the production default; Minimum
/// keeps tests that create many users fast.
enum class HashStrength { Minimum, Interactive };

/// Salted Argon2id digest in libsodium's self-describing string format.
std::string hash_secret(std::string_view secret, HashStrength strength);
bool verify_secret(const std::string& digest, std::string_view secret);

/// 32 random bytes, hex encoded.
std::string random_token();

}  // namespace discom::server
