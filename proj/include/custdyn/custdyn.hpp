#pragma once

// Umbrella header for the customer-dynamics toolkit.

#include "analysis.hpp"
#include "config.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "integrate.hpp"
#include "io.hpp"
#include "model.hpp"
#include "polynomial.hpp"
#include "stability.hpp"
