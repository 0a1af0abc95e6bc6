#pragma once

#include <stdexcept>
#include <string>

namespace ticketsim {

// Failure classes. The CLI maps them onto its exit-code contract and the
// service onto HTTP status codes.
enum class ErrorKind {
  usage,       // bad invocation or configuration
  data,        // malformed or inconsistent input data
  runtime,     // environment failures (I/O, bind, provider)
  not_found,   // unknown id
  validation,  // rejected request payload
  contract,    // a collaborator broke its declared contract
  retryable,   // transient failure, the call may be repeated
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }
inline Error runtime_error(const std::string& what) { return {ErrorKind::runtime, what}; }
inline Error not_found_error(const std::string& what) { return {ErrorKind::not_found, what}; }
inline Error validation_error(const std::string& what) { return {ErrorKind::validation, what}; }
inline Error contract_error(const std::string& what) { return {ErrorKind::contract, what}; }
inline Error retryable_error(const std::string& what) { return {ErrorKind::retryable, what}; }

}  // namespace ticketsim
