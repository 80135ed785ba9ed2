#pragma once

#include <doctest.h>

namespace testing {

// doctest::Approx adds its default scale of 1 to the tolerance, which turns
// small-magnitude comparisons absolute. Use purely relative tolerances.
inline doctest::Approx approx(double value) { return doctest::Approx(value).scale(0.0); }

}  // namespace testing
