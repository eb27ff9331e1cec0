// Copyright 2026 The kerrcat Authors
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

#include "kerrcat/core.hpp"
#include "kerrcat/fockspace.hpp"
#include "kerrcat/model.hpp"
#include "kerrcat/pulses.hpp"
#include "kerrcat/evolve.hpp"
#include "kerrcat/wigner.hpp"
#include "kerrcat/tomography.hpp"
#include "kerrcat/experiments.hpp"
