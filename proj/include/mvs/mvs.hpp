#pragma once

// Umbrella header for the library core (everything except the HTTP service).

#include "mvs/autodiff.hpp"
#include "mvs/checkpoint.hpp"
#include "mvs/controller.hpp"
#include "mvs/data.hpp"
#include "mvs/errors.hpp"
#include "mvs/experiments.hpp"
#include "mvs/fusion.hpp"
#include "mvs/gradcheck.hpp"
#include "mvs/metrics.hpp"
#include "mvs/model.hpp"
#include "mvs/optim.hpp"
#include "mvs/params.hpp"
#include "mvs/serialize.hpp"
#include "mvs/tensor.hpp"
#include "mvs/tokenizer.hpp"
#include "mvs/train.hpp"
#include "mvs/visual.hpp"
