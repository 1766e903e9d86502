#pragma once

#include "kexperts/baselines.hpp"
#include "kexperts/combinatorics.hpp"
#include "kexperts/cover.hpp"
#include "kexperts/environments.hpp"
#include "kexperts/errors.hpp"
#include "kexperts/esp.hpp"
#include "kexperts/ftrl.hpp"
#include "kexperts/harness.hpp"
#include "kexperts/pairwise.hpp"
#include "kexperts/sage_hedge.hpp"
#include "kexperts/sampling.hpp"
