#pragma once

#include "chsim/error.hpp"
#include "chsim/frameworks.hpp"
#include "chsim/histories.hpp"
#include "chsim/matrix.hpp"
#include "chsim/measurement.hpp"
#include "chsim/properties.hpp"
#include "chsim/random.hpp"
#include "chsim/valuation.hpp"
