// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "aen/error.hpp"
#include "aen/timeline.hpp"
#include "aen/tensor.hpp"
#include "aen/manifest.hpp"
#include "aen/linalg.hpp"
#include "aen/encoder.hpp"
#include "aen/fusion.hpp"
#include "aen/supervision.hpp"
#include "aen/inference.hpp"
#include "aen/metrics.hpp"
#include "aen/pipeline.hpp"
