#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bagscan {

enum class ErrorKind {
  InvalidModel,
  InvalidEvidence,
  InconsistentEvidence,
  NotFound,
  ResourceLimit,
  InvalidSpec,
  InvalidArgument,
  Internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bagscan
