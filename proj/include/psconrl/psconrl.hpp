#pragma once

#include "psconrl/agents.hpp"
#include "psconrl/cmdp.hpp"
#include "psconrl/cmdp_lp.hpp"
#include "psconrl/envs.hpp"
#include "psconrl/error.hpp"
#include "psconrl/harness.hpp"
#include "psconrl/lp.hpp"
#include "psconrl/planning.hpp"
#include "psconrl/posterior.hpp"
#include "psconrl/random.hpp"
