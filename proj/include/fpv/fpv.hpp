#pragma once

#include "fpv/chain.hpp"
#include "fpv/confidence.hpp"
#include "fpv/errors.hpp"
#include "fpv/io.hpp"
#include "fpv/mdp.hpp"
#include "fpv/models.hpp"
#include "fpv/passage.hpp"
#include "fpv/sim.hpp"
#include "fpv/spectral.hpp"
