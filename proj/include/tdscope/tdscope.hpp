#pragma once

// Umbrella header.

#include "tdscope/core.hpp"
#include "tdscope/materials.hpp"
#include "tdscope/specfun.hpp"
#include "tdscope/quadrature.hpp"
#include "tdscope/greens.hpp"
#include "tdscope/voxel.hpp"
#include "tdscope/vie.hpp"
#include "tdscope/polarization.hpp"
#include "tdscope/harmonics.hpp"
#include "tdscope/kernels.hpp"
#include "tdscope/td.hpp"
#include "tdscope/config.hpp"
#include "tdscope/report.hpp"
#include "tdscope/studies.hpp"
