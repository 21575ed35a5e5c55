#pragma once

// Off-the-grid sparse spike reconstruction from blurred, Poisson- or
// Gaussian-noisy acquisitions: KL/L2 data terms with TV-norm regularization
// over discrete measures, a Sliding Frank-Wolfe solver, and homotopy
// regularization-parameter selection.

#include "spikesolve/certificate.hpp"
#include "spikesolve/common.hpp"
#include "spikesolve/fidelity.hpp"
#include "spikesolve/field.hpp"
#include "spikesolve/forward.hpp"
#include "spikesolve/geometry.hpp"
#include "spikesolve/homotopy.hpp"
#include "spikesolve/io.hpp"
#include "spikesolve/metrics.hpp"
#include "spikesolve/rng.hpp"
#include "spikesolve/sfw.hpp"
#include "spikesolve/simulation.hpp"
