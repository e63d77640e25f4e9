/* Copyright 2026 The swconv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// Umbrella header for the library. The command-line layer (swconv/cli.hpp)
// is separate because it pulls in CLI11 and nlohmann/json.

#include "swconv/arch.hpp"
#include "swconv/bench.hpp"
#include "swconv/conv_ref.hpp"
#include "swconv/coverage.hpp"
#include "swconv/erf.hpp"
#include "swconv/error.hpp"
#include "swconv/reparam.hpp"
#include "swconv/rng.hpp"
#include "swconv/shift_plan.hpp"
#include "swconv/sparsity.hpp"
#include "swconv/stats.hpp"
#include "swconv/suites.hpp"
#include "swconv/sw_config.hpp"
#include "swconv/sw_op.hpp"
#include "swconv/sw_weights.hpp"
#include "swconv/tensor.hpp"
#include "swconv/text.hpp"
