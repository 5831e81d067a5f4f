// Copyright 2026 The tpagt Authors. All Rights Reserved.
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

#include <tpagt/agnn.hpp>
#include <tpagt/assoc.hpp>
#include <tpagt/bytes.hpp>
#include <tpagt/core.hpp>
#include <tpagt/flow.hpp>
#include <tpagt/io.hpp>
#include <tpagt/loss.hpp>
#include <tpagt/moteval.hpp>
#include <tpagt/roifeat.hpp>
#include <tpagt/synth.hpp>
#include <tpagt/texture.hpp>
#include <tpagt/tracker.hpp>
#include <tpagt/train.hpp>
