#pragma once

#include "mhp/counts.hpp"
#include "mhp/diagnostics.hpp"
#include "mhp/error.hpp"
#include "mhp/exact.hpp"
#include "mhp/io.hpp"
#include "mhp/model.hpp"
#include "mhp/pmmh.hpp"
#include "mhp/rng.hpp"
#include "mhp/simulate.hpp"
#include "mhp/smc.hpp"
#include "mhp/special.hpp"
