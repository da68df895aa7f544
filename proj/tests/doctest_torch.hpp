#pragma once

// Torch's logging macros collide with doctest's assertion names; load torch first and let doctest win.

#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#undef CHECK_FALSE
#undef REQUIRE
#undef REQUIRE_FALSE
#undef WARN

#include <doctest.h>
