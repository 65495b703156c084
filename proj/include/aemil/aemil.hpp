#ifndef AEMIL_AEMIL_HPP
#define AEMIL_AEMIL_HPP

// Umbrella header for the attention-MIL training engine.

#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "objectives.hpp"
#include "ops.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "trainer.hpp"

#endif
