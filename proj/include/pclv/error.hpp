#pragma once

#include <stdexcept>
#include <string>

namespace pclv {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kPrecondition = 4,
  kDegenerate = 5,
  kInternal = 6,
};

// Every failure raised by the library is an Error. The stage tag is filled in
// by the pipeline when an error crosses a stage boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const {
    Error e(code_, stage + ": " + what());
    e.stage_ = std::move(stage);
    return e;
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace pclv
