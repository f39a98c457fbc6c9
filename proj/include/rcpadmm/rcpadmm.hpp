#pragma once

#include "rcpadmm/errors.hpp"
#include "rcpadmm/hankel.hpp"
#include "rcpadmm/problem.hpp"
#include "rcpadmm/admm.hpp"
#include "rcpadmm/svd_calculus.hpp"
#include "rcpadmm/penalty.hpp"
#include "rcpadmm/anderson.hpp"
#include "rcpadmm/solver.hpp"
#include "rcpadmm/simulation.hpp"
#include "rcpadmm/io.hpp"
#include "rcpadmm/experiment.hpp"
