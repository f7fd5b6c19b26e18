#pragma once

#include "phaselab/chain.hpp"
#include "phaselab/detstat.hpp"
#include "phaselab/distribution.hpp"
#include "phaselab/errors.hpp"
#include "phaselab/fock.hpp"
#include "phaselab/geometry.hpp"
#include "phaselab/quadrature.hpp"
#include "phaselab/rng.hpp"
#include "phaselab/special.hpp"
#include "phaselab/trajectory.hpp"
#include "phaselab/trigpoly.hpp"
