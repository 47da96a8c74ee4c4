#pragma once

#include "graspkit/assembly_graph.hpp"
#include "graspkit/common.hpp"
#include "graspkit/depth_io.hpp"
#include "graspkit/evaluation.hpp"
#include "graspkit/graspability.hpp"
#include "graspkit/gripper_models.hpp"
#include "graspkit/handeye.hpp"
#include "graspkit/pick_check.hpp"
#include "graspkit/rigid_transform.hpp"
#include "graspkit/scene_synth.hpp"
