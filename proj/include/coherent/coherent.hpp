#pragma once

#include "coherent/band.hpp"
#include "coherent/errors.hpp"
#include "coherent/expfam.hpp"
#include "coherent/grid.hpp"
#include "coherent/kde.hpp"
#include "coherent/model.hpp"
#include "coherent/quadrature.hpp"
#include "coherent/rng.hpp"
#include "coherent/sample.hpp"
#include "coherent/simulate.hpp"
#include "coherent/verify.hpp"
