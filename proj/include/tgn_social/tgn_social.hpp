#pragma once

#include "tgn_social/autograd.hpp"
#include "tgn_social/config.hpp"
#include "tgn_social/datagen.hpp"
#include "tgn_social/errors.hpp"
#include "tgn_social/evaluation.hpp"
#include "tgn_social/features.hpp"
#include "tgn_social/history.hpp"
#include "tgn_social/metrics.hpp"
#include "tgn_social/negative_sampling.hpp"
#include "tgn_social/optim.hpp"
#include "tgn_social/parallel.hpp"
#include "tgn_social/random.hpp"
#include "tgn_social/session.hpp"
#include "tgn_social/tensor.hpp"
#include "tgn_social/tgn.hpp"
#include "tgn_social/training.hpp"
