#pragma once

#include "sbc/controller.hpp"
#include "sbc/demo_model.hpp"
#include "sbc/encoders.hpp"
#include "sbc/eval_harness.hpp"
#include "sbc/gridnav_env.hpp"
#include "sbc/prng.hpp"
#include "sbc/projection.hpp"
#include "sbc/report.hpp"
#include "sbc/run_config.hpp"
#include "sbc/similarity_index.hpp"
