#pragma once

#include "tmd/errors.hpp"
#include "tmd/fotoc.hpp"
#include "tmd/krylov.hpp"
#include "tmd/model.hpp"
#include "tmd/semiclassical.hpp"
#include "tmd/spectral.hpp"
#include "tmd/thermo.hpp"
