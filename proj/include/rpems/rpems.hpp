// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "common.hpp"
#include "config.hpp"
#include "geometry.hpp"
#include "scenario.hpp"
#include "tensors.hpp"
#include "gstc.hpp"
#include "meta_atom.hpp"
#include "twin.hpp"
#include "surrogate.hpp"
#include "forward_em.hpp"
#include "qipm.hpp"
#include "sbd.hpp"
#include "io.hpp"
#include "pipeline.hpp"
