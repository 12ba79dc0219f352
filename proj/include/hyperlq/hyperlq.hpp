#pragma once

#include "hyperlq/error.hpp"
#include "hyperlq/numerics.hpp"
#include "hyperlq/model.hpp"
#include "hyperlq/riccati.hpp"
#include "hyperlq/frequency.hpp"
#include "hyperlq/pde.hpp"
#include "hyperlq/verify.hpp"
