#pragma once

// Single include for the whole engine.

#include "finsler/errors.hpp"
#include "finsler/rng.hpp"
#include "finsler/tensor.hpp"
#include "finsler/jet.hpp"
#include "finsler/expr.hpp"
#include "finsler/core.hpp"
#include "finsler/quadrature.hpp"
#include "finsler/curvature.hpp"
#include "finsler/nonriem.hpp"
#include "finsler/catalog.hpp"
#include "finsler/geodesics.hpp"
#include "finsler/symmetry.hpp"
#include "finsler/parallel.hpp"
#include "finsler/report.hpp"
#include "finsler/verify.hpp"
