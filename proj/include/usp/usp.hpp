#pragma once

#include "basis.hpp"
#include "kernel.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "perm.hpp"
#include "power.hpp"
#include "rng.hpp"
#include "sample.hpp"
#include "sim.hpp"
#include "testing.hpp"

namespace usp {

inline constexpr const char* version = "0.1.0";

} // namespace usp
