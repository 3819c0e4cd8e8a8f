#pragma once

#include "choquard/grid.hpp"
#include "choquard/spectral.hpp"
#include "choquard/kernel.hpp"
#include "choquard/convolution.hpp"
#include "choquard/energy.hpp"
#include "choquard/ground_state.hpp"
#include "choquard/dynamics.hpp"
#include "choquard/multibump.hpp"
#include "choquard/soliton_ode.hpp"
#include "choquard/io.hpp"
#include "choquard/config.hpp"
