#pragma once

#include "coopfusion/errors.hpp"
#include "coopfusion/linalg.hpp"
#include "coopfusion/error_models.hpp"
#include "coopfusion/model_io.hpp"
#include "coopfusion/tracking.hpp"
#include "coopfusion/association.hpp"
#include "coopfusion/local_fusion.hpp"
#include "coopfusion/global_fusion.hpp"
#include "coopfusion/packet_io.hpp"
#include "coopfusion/assignment.hpp"
#include "coopfusion/calibration.hpp"
#include "coopfusion/rng.hpp"
#include "coopfusion/simulator.hpp"
#include "coopfusion/scenario.hpp"
#include "coopfusion/scenario_log.hpp"
#include "coopfusion/calibration_sweep.hpp"
#include "coopfusion/evaluation.hpp"
