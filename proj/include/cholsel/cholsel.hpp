#pragma once

#include "error.hpp"
#include "experiments.hpp"
#include "hyperparameters.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "pattern.hpp"
#include "priors.hpp"
#include "random.hpp"
#include "scoring.hpp"
#include "search.hpp"
