#pragma once

#include "maskflow/checkpoint.hpp"
#include "maskflow/config.hpp"
#include "maskflow/dataset_io.hpp"
#include "maskflow/diffusion.hpp"
#include "maskflow/evaluation.hpp"
#include "maskflow/experiments.hpp"
#include "maskflow/identifier_adapter.hpp"
#include "maskflow/identifier_assigner.hpp"
#include "maskflow/pipeline.hpp"
#include "maskflow/sprite_world.hpp"
#include "maskflow/training.hpp"
