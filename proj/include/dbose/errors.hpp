#pragma once

#include <stdexcept>
#include <string>

namespace dbose {

// Quadrature did not reach the requested tolerance; carries the achieved one.
class accuracy_error : public std::runtime_error {
 public:
  accuracy_error(const std::string& what, double achieved_tol)
      : std::runtime_error(what + " (achieved tolerance " + std::to_string(achieved_tol) + ")"),
        achieved(achieved_tol) {}
  double achieved;
};

class truncation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class fitting_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// F^2 + G^2 vanished on the contour, or C_eps(c1) >= 1: eps not small enough.
class pole_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Time step too coarse for the mollifier width.
class resolution_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class degenerate_estimate_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dbose
