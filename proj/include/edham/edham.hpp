#pragma once

// Umbrella header. io.hpp is left out because it pulls in nlohmann/json.

#include "edham/errors.hpp"
#include "edham/linalg.hpp"
#include "edham/parallel.hpp"
#include "edham/core_spectral.hpp"
#include "edham/biortho.hpp"
#include "edham/oracle.hpp"
#include "edham/qes_coulomb.hpp"
#include "edham/qes_sextic.hpp"
#include "edham/reduced_solver.hpp"
#include "edham/feshbach.hpp"
#include "edham/toy_mass.hpp"
