#pragma once

// Umbrella header.

#include "robust_sysid/attacks.hpp"
#include "robust_sysid/basis.hpp"
#include "robust_sysid/certificates.hpp"
#include "robust_sysid/config.hpp"
#include "robust_sysid/csv.hpp"
#include "robust_sysid/estimator.hpp"
#include "robust_sysid/experiments.hpp"
#include "robust_sysid/linalg.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/parallel.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/samplers.hpp"
#include "robust_sysid/svg.hpp"
#include "robust_sysid/system.hpp"
#include "robust_sysid/version.hpp"
