// Copyright 2026 The HFLGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Core library. Needs only the standard library and threads.

#pragma once

#include "hflgen/bounds.hpp"
#include "hflgen/divergences.hpp"
#include "hflgen/dp_round.hpp"
#include "hflgen/errors.hpp"
#include "hflgen/hierarchy.hpp"
#include "hflgen/kernel.hpp"
#include "hflgen/parallel.hpp"
#include "hflgen/random.hpp"
#include "hflgen/risk.hpp"
#include "hflgen/topology.hpp"
#include "hflgen/verify.hpp"
