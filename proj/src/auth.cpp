#include "tracklab/auth.hpp"

#include <sodium.h>

#include <fmt/format.h>

#include "tracklab/annotation.hpp"
#include "tracklab/error.hpp"

namespace tracklab::auth {

namespace {

void init_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) fail(ErrorCode::internal, "libsodium failed to initialize");
}

}  // namespace

std::string hash_password(const std::string& password) {
  init_sodium();
  char out[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(out, password.data(), password.size(), crypto_pwhash_OPSLIMIT_INTERACTIVE,
                        crypto_pwhash_MEMLIMIT_INTERACTIVE) != 0) {
    fail(ErrorCode::internal, "password hashing ran out of memory");
  }
  return out;
}

bool verify_password(const std::string& hash, const std::string& password) {
  init_sodium();
  return crypto_pwhash_str_verify(hash.c_str(), password.data(), password.size()) == 0;
}

Authenticator::Authenticator(std::vector<User> users, double token_ttl_s) : users_(std::move(users)), ttl_(token_ttl_s) {
  init_sodium();
}

double Authenticator::now() const { return now_seconds() + skew_; }

void Authenticator::advance_clock(double seconds) {
  std::lock_guard lock(mu_);
  skew_ += seconds;
}

Session Authenticator::login(const std::string& username, const std::string& password) {
  for (const auto& u : users_) {
    if (u.username != username) continue;
    if (!verify_password(u.password_hash, password)) break;
    unsigned char raw[24];
    randombytes_buf(raw, sizeof raw);
    char hex[sizeof raw * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, raw, sizeof raw);
    std::lock_guard lock(mu_);
    Session s{hex, u.username, u.role, now() + ttl_};
    sessions_[s.token] = s;
    return s;
  }
  fail(ErrorCode::unauthenticated, "invalid username or password");
}

Session Authenticator::check(const std::string& token) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(token);
  if (it == sessions_.end()) fail(ErrorCode::unauthenticated, "unknown session token");
  if (it->second.expires_at <= now()) fail(ErrorCode::unauthenticated, "session token expired");
  return it->second;
}

}  // namespace tracklab::auth
