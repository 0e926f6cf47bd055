#pragma once

#include "fcs/approx.hpp"
#include "fcs/curve.hpp"
#include "fcs/curve_space.hpp"
#include "fcs/error.hpp"
#include "fcs/fourier.hpp"
#include "fcs/grid.hpp"
#include "fcs/hjmm.hpp"
#include "fcs/quadrature.hpp"
#include "fcs/random.hpp"
#include "fcs/spectral.hpp"
