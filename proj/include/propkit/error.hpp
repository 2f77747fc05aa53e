#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace propkit {

enum class ErrorKind {
  Parse,
  EmptySeries,
  DataIntegrity,
  InvalidInput,
  DegenerateType,
  Conditioning,
  Horizon,
  Validation,
  Underdetermined,
  NotRepresentable,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `module()` names the component that
/// detected the problem (events, stats, dar, tim, hdim, synth, noisefit, cli).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace propkit
