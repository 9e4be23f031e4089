#pragma once

// Umbrella header for the decompound library.

#include "decompound/cholesky.hpp"
#include "decompound/cli.hpp"
#include "decompound/config.hpp"
#include "decompound/csv.hpp"
#include "decompound/diagnostics.hpp"
#include "decompound/divergence.hpp"
#include "decompound/increment_law.hpp"
#include "decompound/io.hpp"
#include "decompound/mixture.hpp"
#include "decompound/observations.hpp"
#include "decompound/quadrature.hpp"
#include "decompound/rng.hpp"
#include "decompound/sampler.hpp"
#include "decompound/simulate.hpp"
