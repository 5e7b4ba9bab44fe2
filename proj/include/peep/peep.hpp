//
// Copyright 2026 The PEEP Authors
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
//
#pragma once

#include "peep/attack.hpp"
#include "peep/bundle.hpp"
#include "peep/dataset.hpp"
#include "peep/dp.hpp"
#include "peep/eigenfaces.hpp"
#include "peep/error.hpp"
#include "peep/image.hpp"
#include "peep/linalg.hpp"
#include "peep/merge.hpp"
#include "peep/metrics.hpp"
#include "peep/mlp.hpp"
#include "peep/pipeline.hpp"
#include "peep/rng.hpp"
#include "peep/synth.hpp"
