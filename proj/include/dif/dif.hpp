#pragma once

// Umbrella header.

#include "dif/checkpoint.hpp"
#include "dif/config.hpp"
#include "dif/experiment.hpp"
#include "dif/field.hpp"
#include "dif/grid.hpp"
#include "dif/marching_cubes.hpp"
#include "dif/mesh.hpp"
#include "dif/mesh_io.hpp"
#include "dif/mesh_queries.hpp"
#include "dif/metrics.hpp"
#include "dif/model.hpp"
#include "dif/nn.hpp"
#include "dif/sampling.hpp"
#include "dif/shapes.hpp"
#include "dif/train.hpp"
