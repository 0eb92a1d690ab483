#pragma once

#include "mcfpll/core.hpp"
#include "mcfpll/optics.hpp"
#include "mcfpll/noise.hpp"
#include "mcfpll/controller.hpp"
#include "mcfpll/fft.hpp"
#include "mcfpll/analysis.hpp"
#include "mcfpll/scenario.hpp"
#include "mcfpll/simulation.hpp"
#include "mcfpll/emit.hpp"
