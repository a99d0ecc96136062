// Umbrella header.
#pragma once

#include "hopt/core.hpp"
#include "hopt/diagnostics.hpp"
#include "hopt/energy.hpp"
#include "hopt/hermite.hpp"
#include "hopt/io.hpp"
#include "hopt/multidim.hpp"
#include "hopt/optim.hpp"
#include "hopt/parallel.hpp"
#include "hopt/profile.hpp"
#include "hopt/recovery.hpp"
#include "hopt/rng.hpp"
