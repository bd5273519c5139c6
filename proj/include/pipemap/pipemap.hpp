#pragma once

// Umbrella header for the pipemap library: remaining-wall-thickness map
// reconstruction from partial pipe scans via marginal-transformed
// Gaussian-process interpolation.

#include "pipemap/gof.hpp"
#include "pipemap/gp.hpp"
#include "pipemap/grid.hpp"
#include "pipemap/marginals.hpp"
#include "pipemap/normal.hpp"
#include "pipemap/pipeline.hpp"
#include "pipemap/render.hpp"
#include "pipemap/util.hpp"
