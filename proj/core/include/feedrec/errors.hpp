#pragma once

#include <stdexcept>
#include <string>

namespace feedrec {

// A required file or directory does not exist or cannot be opened.
class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A NaN or infinity appeared where a finite value was required.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace feedrec
