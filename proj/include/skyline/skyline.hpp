#ifndef SKYLINE_SKYLINE_HPP_
#define SKYLINE_SKYLINE_HPP_

// Umbrella header.
#include "skyline/bivariate.hpp"
#include "skyline/catalog.hpp"
#include "skyline/commands.hpp"
#include "skyline/error.hpp"
#include "skyline/gpd.hpp"
#include "skyline/hier.hpp"
#include "skyline/optim.hpp"
#include "skyline/parallel.hpp"
#include "skyline/report.hpp"
#include "skyline/rng.hpp"
#include "skyline/simulate.hpp"
#include "skyline/trend.hpp"

#endif  // SKYLINE_SKYLINE_HPP_
