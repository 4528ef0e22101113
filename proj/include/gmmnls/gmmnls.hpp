#ifndef GMMNLS_GMMNLS_HPP
#define GMMNLS_GMMNLS_HPP

#include "gmmnls/bench/metrics.hpp"
#include "gmmnls/bench/psr.hpp"
#include "gmmnls/bench/reporting.hpp"
#include "gmmnls/bench/sweep.hpp"
#include "gmmnls/bench/toy.hpp"
#include "gmmnls/factor.hpp"
#include "gmmnls/lie.hpp"
#include "gmmnls/mixture.hpp"
#include "gmmnls/mixture_factors.hpp"
#include "gmmnls/numdiff.hpp"
#include "gmmnls/numeric.hpp"
#include "gmmnls/parallel.hpp"
#include "gmmnls/rng.hpp"
#include "gmmnls/solver.hpp"

#endif  // GMMNLS_GMMNLS_HPP
