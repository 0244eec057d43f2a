#pragma once

#include <cmath>
#include <map>
#include <string>

#include "doctest.h"
#include "stickymfg/error.hpp"
#include "stickymfg/params.hpp"

namespace testing {

inline stickymfg::ModelParams base_params() {
  return stickymfg::validate_params({{"sigma", 0.1}, {"theta", 1.0}, {"rho", 0.02}, {"alpha", 0.0},
                                     {"b_curv", 20.0}, {"psi", 0.01}, {"delta", 0.01}, {"horizon", 10.0}});
}

template <class Fn>
stickymfg::Errc error_code(Fn&& fn) {
  try {
    fn();
  } catch (const stickymfg::Error& e) {
    return e.code();
  }
  FAIL("expected stickymfg::Error");
  return stickymfg::Errc::Io;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace testing
