#pragma once

// Causal ordering for multivariate functional data: basis smoothing, functional
// PCA, kernel-independence ordering, block adjacency estimation, and the
// synthetic benchmark/evaluation toolkit around them.

#include "funclingam/common.hpp"
#include "funclingam/curves.hpp"
#include "funclingam/dependence.hpp"
#include "funclingam/discovery.hpp"
#include "funclingam/fpca.hpp"
#include "funclingam/graph.hpp"
#include "funclingam/io.hpp"
#include "funclingam/metrics.hpp"
#include "funclingam/synthgen.hpp"
