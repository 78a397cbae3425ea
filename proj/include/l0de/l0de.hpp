#pragma once

#include "capped_quadratic.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "evaluate.hpp"
#include "fitter.hpp"
#include "groups.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "landscape.hpp"
#include "matrix.hpp"
#include "random.hpp"
#include "report.hpp"
#include "simulate.hpp"
#include "variance.hpp"
