#pragma once

#include <stdexcept>
#include <string>

namespace tcdesc {

enum class ErrorKind {
  kInvalidInput,
  kInvalidArgument,
  kInvalidBatch,
  kSingularSystem,
  kDegenerateFit,
  kDegenerateDescriptor,
  kFormat,
  kIo,
  kDivergence,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tcdesc
