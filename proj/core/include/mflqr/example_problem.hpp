#pragma once

#include "mflqr/system.hpp"

namespace mflqr::example {

/// Three-state, two-input benchmark system with an open-loop operator
/// radius near 3.95.
MfSystem system();

/// Q = diag(0, 1.5, 1), Qbar = diag(1, 1, 0), R = I, Rbar = diag(1.5, 1).
WeightSpec weights();

/// Stabilizing starting gains for the benchmark (operator radius 0.605).
GainPair initial_gains();

/// Twenty initial states: means and centered parts, 3 x 20 each.
InitialStateEnsemble initial_states();

}  // namespace mflqr::example
