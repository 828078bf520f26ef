#pragma once

// Umbrella include for the whole library.

#include "nerfgs/adam.hpp"
#include "nerfgs/camera.hpp"
#include "nerfgs/checkpoint.hpp"
#include "nerfgs/common.hpp"
#include "nerfgs/config.hpp"
#include "nerfgs/counters.hpp"
#include "nerfgs/densify.hpp"
#include "nerfgs/edges.hpp"
#include "nerfgs/gaussian.hpp"
#include "nerfgs/gradcheck.hpp"
#include "nerfgs/gs_rays.hpp"
#include "nerfgs/hash_grid.hpp"
#include "nerfgs/image.hpp"
#include "nerfgs/init.hpp"
#include "nerfgs/losses.hpp"
#include "nerfgs/metrics.hpp"
#include "nerfgs/mlp.hpp"
#include "nerfgs/model.hpp"
#include "nerfgs/nerf.hpp"
#include "nerfgs/param.hpp"
#include "nerfgs/pipeline.hpp"
#include "nerfgs/project.hpp"
#include "nerfgs/rasterize.hpp"
#include "nerfgs/rng.hpp"
#include "nerfgs/scene.hpp"
#include "nerfgs/sh.hpp"
#include "nerfgs/threading.hpp"
#include "nerfgs/trainer.hpp"
#include "nerfgs/vec.hpp"
