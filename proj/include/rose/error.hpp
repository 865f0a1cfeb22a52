#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rose {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One located problem in an input file. line is 1-based; 0 means the
// diagnostic is not tied to a line.
struct Diagnostic {
  std::string file;
  std::size_t line = 0;
  std::string message;

  std::string to_string() const;
};

// Input failed validation. Carries every diagnostic found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diagnostics);

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace rose
