#pragma once

#include "contact_imm/types.hpp"
#include "contact_imm/rotation.hpp"
#include "contact_imm/model.hpp"
#include "contact_imm/dynamics.hpp"
#include "contact_imm/kalman.hpp"
#include "contact_imm/imm.hpp"
#include "contact_imm/measurements.hpp"
#include "contact_imm/estimator.hpp"
#include "contact_imm/sim.hpp"
#include "contact_imm/metrics.hpp"
#include "contact_imm/csv.hpp"
#include "contact_imm/config.hpp"
#include "contact_imm/harness.hpp"
