#pragma once

#include "nlwave/errors.hpp"
#include "nlwave/damping.hpp"
#include "nlwave/lattice.hpp"
#include "nlwave/gauge.hpp"
#include "nlwave/field.hpp"
#include "nlwave/testfn.hpp"
#include "nlwave/wavesim.hpp"
#include "nlwave/config.hpp"
#include "nlwave/io.hpp"
