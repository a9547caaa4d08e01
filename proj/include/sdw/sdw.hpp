#pragma once

#include "sdw/agent.hpp"
#include "sdw/checkpoint.hpp"
#include "sdw/config.hpp"
#include "sdw/env.hpp"
#include "sdw/errors.hpp"
#include "sdw/experiment.hpp"
#include "sdw/io.hpp"
#include "sdw/losses.hpp"
#include "sdw/metrics.hpp"
#include "sdw/replay.hpp"
#include "sdw/rng.hpp"
#include "sdw/similarity.hpp"
#include "sdw/trainer.hpp"
#include "sdw/weighting.hpp"
