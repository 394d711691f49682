// Copyright 2026 The hipama Authors.
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

#include "hipama/checkpoint.hpp"
#include "hipama/config.hpp"
#include "hipama/data.hpp"
#include "hipama/inspect.hpp"
#include "hipama/layers.hpp"
#include "hipama/metrics.hpp"
#include "hipama/model.hpp"
#include "hipama/optim.hpp"
#include "hipama/random.hpp"
#include "hipama/synthetic.hpp"
#include "hipama/tensor.hpp"
#include "hipama/train.hpp"
