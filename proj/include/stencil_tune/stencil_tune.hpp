#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "stencil.hpp"
#include "candidates.hpp"
#include "topology.hpp"
#include "executor.hpp"
#include "tuner.hpp"
#include "counters.hpp"
