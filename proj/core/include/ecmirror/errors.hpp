#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ecmirror {

// Input outside an operation's mathematical domain (bad score, empty data,
// invalid hyperparameters, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure while fitting a model.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Parameter vectors built for different architectures.
class SchemaMismatch : public std::runtime_error {
 public:
  SchemaMismatch(std::uint64_t expected, std::uint64_t got)
      : std::runtime_error("parameter schema mismatch: expected " +
                           std::to_string(expected) + ", got " +
                           std::to_string(got)),
        expected_(expected),
        got_(got) {}

  std::uint64_t expected() const noexcept { return expected_; }
  std::uint64_t got() const noexcept { return got_; }

 private:
  std::uint64_t expected_;
  std::uint64_t got_;
};

// Malformed file content (model, dataset, config, log).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unanswerable wire message.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ecmirror
