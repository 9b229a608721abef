#pragma once

#include "lvm/dataset.hpp"
#include "lvm/deep.hpp"
#include "lvm/distributions.hpp"
#include "lvm/estimators.hpp"
#include "lvm/log.hpp"
#include "lvm/model_spec.hpp"
#include "lvm/moments.hpp"
#include "lvm/numerics.hpp"
#include "lvm/reductions.hpp"
#include "lvm/rng.hpp"
#include "lvm/sampling.hpp"
#include "lvm/serialize.hpp"
