#pragma once

#include <stdexcept>
#include <string>

namespace mklmmwu {

enum class ErrorCode {
  EmptyDataset,
  MalformedLine,
  NonBinaryLabels,
  OneClassSplit,
  InvalidArgument,
  DegenerateKernel,
  InfeasibleDual,
  NumericalFailure,
  DegenerateModel,
  DimensionMismatch,
  MalformedModel,
  VersionMismatch,
  Io,
};

const char* to_string(ErrorCode code);

class MklError : public std::runtime_error {
 public:
  MklError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mklmmwu
