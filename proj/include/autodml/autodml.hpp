#pragma once

// Complier-parameter estimation with automatically learned balancing weights:
// cross-fitted doubly-robust moments, sandwich variance, instrument-equality
// Wald tests, and Gaussian-multiplier simultaneous bands, plus inverse-
// propensity and kappa-weighting baselines and a Monte-Carlo harness.

#include "autodml/baselines.hpp"
#include "autodml/crossfit.hpp"
#include "autodml/dataset.hpp"
#include "autodml/dictionary.hpp"
#include "autodml/errors.hpp"
#include "autodml/inference.hpp"
#include "autodml/linalg.hpp"
#include "autodml/moments.hpp"
#include "autodml/numeric.hpp"
#include "autodml/optim.hpp"
#include "autodml/report.hpp"
#include "autodml/riesz.hpp"
#include "autodml/rng.hpp"
#include "autodml/simlab.hpp"
