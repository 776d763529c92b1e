#pragma once

#include "bmm2d/config.hpp"
#include "bmm2d/contamination.hpp"
#include "bmm2d/errors.hpp"
#include "bmm2d/estimators.hpp"
#include "bmm2d/grid.hpp"
#include "bmm2d/imaging.hpp"
#include "bmm2d/montecarlo.hpp"
#include "bmm2d/optimizer.hpp"
#include "bmm2d/random.hpp"
#include "bmm2d/robust_kernel.hpp"
