#pragma once

#include "fetl/numcore/activation.hpp"
#include "fetl/numcore/grad_check.hpp"
#include "fetl/numcore/loss.hpp"
#include "fetl/numcore/mlp.hpp"
#include "fetl/numcore/optim.hpp"
#include "fetl/numcore/types.hpp"
