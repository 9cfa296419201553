#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace tracklab::auth {

/// Salted Argon2id hash in the libsodium string format.
std::string hash_password(const std::string& password);
bool verify_password(const std::string& hash, const std::string& password);

struct User {
  std::string username;
  std::string password_hash;
  std::string role = "annotator";
};

struct Session {
  std::string token;
  std::string username;
  std::string role;
  double expires_at = 0.0;
};

/// Static user table plus in-memory session tokens.
class Authenticator {
 public:
  Authenticator(std::vector<User> users, double token_ttl_s);

  /// Throws unauthenticated on an unknown user or a wrong password.
  Session login(const std::string& username, const std::string& password);
  /// Throws unauthenticated on unknown or expired tokens.
  Session check(const std::string& token) const;
  /// Test hook: pretend `seconds` have passed.
  void advance_clock(double seconds);

 private:
  double now() const;

  std::vector<User> users_;
  double ttl_;
  double skew_ = 0.0;
  mutable std::mutex mu_;
  std::map<std::string, Session> sessions_;
};

}  // namespace tracklab::auth
