#pragma once

#include "lqgent/config.hpp"
#include "lqgent/constants.hpp"
#include "lqgent/control.hpp"
#include "lqgent/entanglement.hpp"
#include "lqgent/errors.hpp"
#include "lqgent/gaussian.hpp"
#include "lqgent/io.hpp"
#include "lqgent/model.hpp"
#include "lqgent/riccati.hpp"
#include "lqgent/solvers.hpp"
#include "lqgent/sweep.hpp"
#include "lqgent/trajectory.hpp"
#include "lqgent/types.hpp"
