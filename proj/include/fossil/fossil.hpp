// Umbrella header.

#pragma once

#include "fossil/bench.hpp"
#include "fossil/cegis.hpp"
#include "fossil/certificates.hpp"
#include "fossil/config.hpp"
#include "fossil/domains.hpp"
#include "fossil/expr.hpp"
#include "fossil/learner.hpp"
#include "fossil/models.hpp"
#include "fossil/nnet.hpp"
#include "fossil/smt2.hpp"
#include "fossil/verifier.hpp"
