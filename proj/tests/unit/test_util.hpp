#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "ppft/error.hpp"

// Asserts that `expr` throws ppft::Error with the given code.
#define REQUIRE_ERROR(expr, expected_code)                          \
  do {                                                              \
    try {                                                           \
      (void)(expr);                                                 \
      FAIL("expected Error " << ppft::to_string(expected_code));    \
    } catch (const ppft::Error& caught_) {                          \
      REQUIRE(caught_.code() == (expected_code));                   \
    }                                                               \
  } while (0)
