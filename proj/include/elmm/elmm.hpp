#pragma once

#include "config.hpp"
#include "core.hpp"
#include "hapke.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "scene.hpp"
#include "solver.hpp"

#include <string_view>

namespace elmm {
inline constexpr std::string_view version = "0.1.0";
}
