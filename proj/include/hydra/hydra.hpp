// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hydra/comm_plan.hpp"
#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"
#include "hydra/dispatch.hpp"
#include "hydra/io.hpp"
#include "hydra/packing.hpp"
#include "hydra/planner.hpp"
#include "hydra/presets.hpp"
#include "hydra/proposal.hpp"
#include "hydra/scheme.hpp"
#include "hydra/simulator.hpp"
#include "hydra/workload.hpp"
