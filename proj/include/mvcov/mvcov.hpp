#pragma once

// Convenience include of the whole library.

#include "mvcov/cokrige.hpp"
#include "mvcov/config.hpp"
#include "mvcov/design.hpp"
#include "mvcov/empirical.hpp"
#include "mvcov/estimate.hpp"
#include "mvcov/gaussian.hpp"
#include "mvcov/io.hpp"
#include "mvcov/kernels.hpp"
#include "mvcov/models.hpp"
#include "mvcov/spacetime.hpp"
#include "mvcov/specfun.hpp"
