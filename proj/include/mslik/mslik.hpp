#pragma once

// Umbrella header: multiscale likelihood factorizations and complexity
// penalized estimation for Gaussian, Poisson and multinomial models on
// 1-D grids.

#include "mslik/errors.hpp"
#include "mslik/estimators.hpp"
#include "mslik/models.hpp"
#include "mslik/multiscale.hpp"
#include "mslik/partition.hpp"
#include "mslik/risk.hpp"
#include "mslik/rng.hpp"
#include "mslik/serialize.hpp"
#include "mslik/signal.hpp"
