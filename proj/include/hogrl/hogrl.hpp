#pragma once

#include "hogrl/error.hpp"
#include "hogrl/gradcheck.hpp"
#include "hogrl/graph.hpp"
#include "hogrl/highorder.hpp"
#include "hogrl/io.hpp"
#include "hogrl/matrix.hpp"
#include "hogrl/metrics.hpp"
#include "hogrl/model.hpp"
#include "hogrl/random.hpp"
#include "hogrl/synth.hpp"
#include "hogrl/training.hpp"
