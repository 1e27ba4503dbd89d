#pragma once

#include <stdexcept>
#include <string>

namespace tplc {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidState : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed or inconsistent file content.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed file in an encoding we do not handle (e.g. stereo WAV).
struct UnsupportedFormat : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tplc
