#pragma once

#include "simnull/errors.hpp"
#include "simnull/grid.hpp"
#include "simnull/operators.hpp"
#include "simnull/spectral.hpp"
#include "simnull/doubling.hpp"
#include "simnull/lp.hpp"
#include "simnull/parallel.hpp"
#include "simnull/specineq.hpp"
#include "simnull/control.hpp"
#include "simnull/sim.hpp"
#include "simnull/io.hpp"
#include "simnull/config.hpp"
#include "simnull/commands.hpp"
