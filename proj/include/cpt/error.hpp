#pragma once

#include <stdexcept>
#include <string>

namespace cpt {

// Invalid configuration or caller input (bad flags, out-of-range parameters,
// mismatched shapes).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset cannot satisfy the request (e.g. a class with too few labeled nodes).
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File / parse / cross-file consistency problems.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite arithmetic was required.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpt
