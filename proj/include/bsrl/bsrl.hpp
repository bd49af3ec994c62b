#pragma once

#include "bsrl/common.hpp"
#include "bsrl/core.hpp"
#include "bsrl/dqn.hpp"
#include "bsrl/env.hpp"
#include "bsrl/eval.hpp"
#include "bsrl/policies.hpp"
#include "bsrl/scenario.hpp"
#include "bsrl/sim.hpp"
#include "bsrl/trainer.hpp"
