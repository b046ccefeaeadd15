#pragma once

#include "stmala/config.hpp"
#include "stmala/csv.hpp"
#include "stmala/datagen.hpp"
#include "stmala/diagnostics.hpp"
#include "stmala/experiment.hpp"
#include "stmala/linalg.hpp"
#include "stmala/operators.hpp"
#include "stmala/oracle.hpp"
#include "stmala/proposal.hpp"
#include "stmala/rjmcmc.hpp"
#include "stmala/rng.hpp"
#include "stmala/samplers.hpp"
#include "stmala/sparse_state.hpp"
#include "stmala/targets.hpp"
#include "stmala/types.hpp"
#include "stmala/validation.hpp"
