#pragma once

#include "scalefisher/error.hpp"
#include "scalefisher/estimator.hpp"
#include "scalefisher/fisher.hpp"
#include "scalefisher/io.hpp"
#include "scalefisher/linalg.hpp"
#include "scalefisher/model.hpp"
#include "scalefisher/montecarlo.hpp"
#include "scalefisher/numeric.hpp"
#include "scalefisher/quadrature.hpp"
#include "scalefisher/random.hpp"
#include "scalefisher/spectral.hpp"
