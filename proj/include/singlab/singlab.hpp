#pragma once

#include "asymptotic_estimates.hpp"
#include "classification.hpp"
#include "convolution.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "monotone_solver.hpp"
#include "quadrature.hpp"
#include "radial_profile.hpp"
#include "special_functions.hpp"
