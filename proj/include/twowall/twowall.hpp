#pragma once

#include "twowall/coefficients.hpp"
#include "twowall/config.hpp"
#include "twowall/drift.hpp"
#include "twowall/envelope.hpp"
#include "twowall/error.hpp"
#include "twowall/greens.hpp"
#include "twowall/grid.hpp"
#include "twowall/heat_operator.hpp"
#include "twowall/hitting.hpp"
#include "twowall/io.hpp"
#include "twowall/noise.hpp"
#include "twowall/obstacle.hpp"
#include "twowall/picard.hpp"
#include "twowall/spde.hpp"
#include "twowall/walls.hpp"
#include "twowall/weak_form.hpp"
