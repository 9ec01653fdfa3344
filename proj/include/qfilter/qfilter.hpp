// Copyright 2026 The qfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header: single-shot quantum parameter estimation via continuous
// measurement. Pull in everything.

#pragma once

#include "qfilter/csv.hpp"
#include "qfilter/ensemble.hpp"
#include "qfilter/experiments.hpp"
#include "qfilter/observability.hpp"
#include "qfilter/operators.hpp"
#include "qfilter/particle_filter.hpp"
#include "qfilter/qubit.hpp"
#include "qfilter/rng.hpp"
#include "qfilter/sme.hpp"
