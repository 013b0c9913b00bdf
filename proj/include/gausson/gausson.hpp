#pragma once

#include "gausson/core.hpp"
#include "gausson/csv.hpp"
#include "gausson/errors.hpp"
#include "gausson/gausson_ode.hpp"
#include "gausson/pde_xcheck.hpp"
#include "gausson/stability.hpp"
#include "gausson/stationary.hpp"
