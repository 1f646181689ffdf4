#pragma once

#include "spdclab/analysis.hpp"
#include "spdclab/biphoton.hpp"
#include "spdclab/biphoton_io.hpp"
#include "spdclab/counting.hpp"
#include "spdclab/dispersion.hpp"
#include "spdclab/error.hpp"
#include "spdclab/etpa.hpp"
#include "spdclab/phasematch.hpp"
#include "spdclab/units.hpp"
