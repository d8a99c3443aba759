#pragma once

#include <stdexcept>
#include <string>

namespace pimflow {

enum class ErrorCode {
  // kernel IR
  UnknownInputSlot,
  UnknownBuffer,
  TypeMismatch,
  ConstDivisionByZero,
  RuntimeDivisionByZero,
  BroadcastIndexOutOfBounds,
  // pipeline
  EmptyPipeline,
  StageTypeMismatch,
  BadWindowSize,
  BadGroupSize,
  StageAfterScalarReduce,
  InputLengthMismatch,
  // planner
  TileTooSmall,
  MramOverflow,
  IramOverflow,
  // machine
  MramBounds,
  BadAlignment,
  WramBounds,
  CountExceedsRegion,
  // bench / cli
  BadSpec,
  VerificationFailed,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pimflow
