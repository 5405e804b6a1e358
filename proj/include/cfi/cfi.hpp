#pragma once

// umbrella header

#include "cfi/baselines.hpp"
#include "cfi/core.hpp"
#include "cfi/cpi.hpp"
#include "cfi/evalmetrics.hpp"
#include "cfi/knockoffs.hpp"
#include "cfi/learners.hpp"
#include "cfi/penalized.hpp"
#include "cfi/pipeline.hpp"
#include "cfi/simgen.hpp"
#include "cfi/stats.hpp"
#include "cfi/tabular.hpp"
