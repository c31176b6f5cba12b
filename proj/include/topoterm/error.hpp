#pragma once

#include <stdexcept>
#include <string>

namespace topoterm {

// Base class for all recoverable failures raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; the message carries the file and line.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A word has neither a vocabulary row nor a supplementary (OOV) row.
class MissingEmbedding : public Error {
 public:
  explicit MissingEmbedding(const std::string& word)
      : Error("no embedding for word '" + word + "'"), word_(word) {}
  const std::string& word() const noexcept { return word_; }

 private:
  std::string word_;
};

}  // namespace topoterm
