#pragma once

#include "dmff/autodiff.hpp"
#include "dmff/cfe.hpp"
#include "dmff/complexity.hpp"
#include "dmff/config_json.hpp"
#include "dmff/cost_counter.hpp"
#include "dmff/dmff.hpp"
#include "dmff/errors.hpp"
#include "dmff/gradcheck.hpp"
#include "dmff/icfe.hpp"
#include "dmff/kernels.hpp"
#include "dmff/ops.hpp"
#include "dmff/rawtensor.hpp"
#include "dmff/rng.hpp"
#include "dmff/sfs.hpp"
#include "dmff/synthetic.hpp"
#include "dmff/tensor.hpp"
#include "dmff/token_codec.hpp"
#include "dmff/train.hpp"
#include "dmff/weights_io.hpp"
