#pragma once

#include "analysis.hpp"
#include "coupling.hpp"
#include "errors.hpp"
#include "group.hpp"
#include "io.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "solver.hpp"
