#pragma once

#include "fleetcharge/errors.hpp"
#include "fleetcharge/linalg.hpp"
#include "fleetcharge/model.hpp"
#include "fleetcharge/feasible_sets.hpp"
#include "fleetcharge/equilibrium.hpp"
#include "fleetcharge/robustness.hpp"
#include "fleetcharge/surge.hpp"
#include "fleetcharge/network.hpp"
#include "fleetcharge/simulation.hpp"
#include "fleetcharge/scenario.hpp"
#include "fleetcharge/harness.hpp"
