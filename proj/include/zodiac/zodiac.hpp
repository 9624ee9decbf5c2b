// Copyright 2026 The zodiac-pb Authors
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


#pragma once

#include "zodiac/errors.hpp"
#include "zodiac/estimator.hpp"
#include "zodiac/format.hpp"
#include "zodiac/harness.hpp"
#include "zodiac/optimizer.hpp"
#include "zodiac/powerball.hpp"
#include "zodiac/problems.hpp"
#include "zodiac/rng.hpp"
#include "zodiac/topology.hpp"
