//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "geqshift/autodiff.hpp"
#include "geqshift/checkpoint.hpp"
#include "geqshift/clebsch_gordan.hpp"
#include "geqshift/csv.hpp"
#include "geqshift/equivariant.hpp"
#include "geqshift/error.hpp"
#include "geqshift/evaluation.hpp"
#include "geqshift/folds.hpp"
#include "geqshift/geometric_tensor.hpp"
#include "geqshift/geometry.hpp"
#include "geqshift/graph.hpp"
#include "geqshift/irreps.hpp"
#include "geqshift/logging.hpp"
#include "geqshift/model.hpp"
#include "geqshift/molecule.hpp"
#include "geqshift/prediction.hpp"
#include "geqshift/reference.hpp"
#include "geqshift/run_config.hpp"
#include "geqshift/selfcheck.hpp"
#include "geqshift/spherical_harmonics.hpp"
#include "geqshift/synthetic.hpp"
#include "geqshift/tensor_product.hpp"
#include "geqshift/training.hpp"
#include "geqshift/wigner.hpp"
