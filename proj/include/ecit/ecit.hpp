#pragma once

#include "ecit/base_tests.hpp"
#include "ecit/combiners.hpp"
#include "ecit/config.hpp"
#include "ecit/csv.hpp"
#include "ecit/data.hpp"
#include "ecit/datagen.hpp"
#include "ecit/discovery.hpp"
#include "ecit/ensemble.hpp"
#include "ecit/error.hpp"
#include "ecit/experiment.hpp"
#include "ecit/json_io.hpp"
#include "ecit/parallel.hpp"
#include "ecit/quadrature.hpp"
#include "ecit/report.hpp"
#include "ecit/rng.hpp"
#include "ecit/stable.hpp"
