#pragma once

#include "s2dip/adam.hpp"
#include "s2dip/autodiff.hpp"
#include "s2dip/cube.hpp"
#include "s2dip/cube_io.hpp"
#include "s2dip/error.hpp"
#include "s2dip/kernels.hpp"
#include "s2dip/loss.hpp"
#include "s2dip/metrics.hpp"
#include "s2dip/network.hpp"
#include "s2dip/noise.hpp"
#include "s2dip/npy.hpp"
#include "s2dip/pipeline.hpp"
#include "s2dip/rng.hpp"
#include "s2dip/run_file.hpp"
#include "s2dip/synthetic.hpp"
#include "s2dip/tensor.hpp"
