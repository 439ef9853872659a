#pragma once

#include "kdlite/nn/errors.hpp"
#include "kdlite/nn/grad_check.hpp"
#include "kdlite/nn/ops.hpp"
#include "kdlite/nn/rng.hpp"
#include "kdlite/nn/tensor.hpp"
#include "kdlite/nn/var.hpp"
