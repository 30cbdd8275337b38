#pragma once

// Umbrella header for the resilience-index library.

#include "mdri/errors.hpp"
#include "mdri/numfmt.hpp"
#include "mdri/timeseries.hpp"
#include "mdri/performance.hpp"
#include "mdri/dimensions.hpp"
#include "mdri/index.hpp"
#include "mdri/simulator.hpp"
#include "mdri/config.hpp"
#include "mdri/pipeline.hpp"
