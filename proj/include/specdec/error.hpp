#pragma once

#include <stdexcept>
#include <string>

namespace specdec {

// Bad arguments or data that violates a type invariant.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or unwritable files; the message always carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Speculative output diverged from baseline greedy output. Never expected;
// raising it means a decoder bug.
class LosslessnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace specdec
