#pragma once

// Umbrella header for the land-air robot simulator.

#include "landair/core.hpp"
#include "landair/kinematics.hpp"
#include "landair/flight_dynamics.hpp"
#include "landair/chassis_dynamics.hpp"
#include "landair/ground_effect.hpp"
#include "landair/params.hpp"
#include "landair/qp_solver.hpp"
#include "landair/jlt_planner.hpp"
#include "landair/lqr.hpp"
#include "landair/mode_fsm.hpp"
#include "landair/sim_engine.hpp"
#include "landair/controllers.hpp"
#include "landair/scenario.hpp"
#include "landair/metrics.hpp"
#include "landair/batch.hpp"
