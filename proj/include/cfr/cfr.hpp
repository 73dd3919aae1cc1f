#pragma once

#include "cfr/checkpoint.hpp"
#include "cfr/delay.hpp"
#include "cfr/ecmp.hpp"
#include "cfr/error.hpp"
#include "cfr/experiment.hpp"
#include "cfr/metrics.hpp"
#include "cfr/policy.hpp"
#include "cfr/rerouting.hpp"
#include "cfr/selectors.hpp"
#include "cfr/simplex.hpp"
#include "cfr/topology.hpp"
#include "cfr/traffic.hpp"
#include "cfr/traffic_matrix.hpp"
#include "cfr/trainer.hpp"
