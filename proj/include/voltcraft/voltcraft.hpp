// Umbrella header pulling in the whole library.
#pragma once

#include "voltcraft/analytic.hpp"
#include "voltcraft/calibration.hpp"
#include "voltcraft/errors.hpp"
#include "voltcraft/io.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/math.hpp"
#include "voltcraft/monte_carlo.hpp"
#include "voltcraft/pde.hpp"
#include "voltcraft/price_surface.hpp"
#include "voltcraft/risk.hpp"
#include "voltcraft/simplex.hpp"
#include "voltcraft/superrep.hpp"
#include "voltcraft/vol_surface.hpp"
