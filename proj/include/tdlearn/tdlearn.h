// Copyright 2026 The tdlearn Authors
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

// Umbrella header.

#ifndef TDLEARN_TDLEARN_H
#define TDLEARN_TDLEARN_H

#include "tdlearn/common.h"
#include "tdlearn/dense.h"
#include "tdlearn/derivative.h"
#include "tdlearn/lattice.h"
#include "tdlearn/lindblad.h"
#include "tdlearn/ode.h"
#include "tdlearn/overlaps.h"
#include "tdlearn/pauli.h"
#include "tdlearn/pipeline.h"
#include "tdlearn/probes.h"
#include "tdlearn/rev.h"
#include "tdlearn/schedule.h"
#include "tdlearn/shadows.h"
#include "tdlearn/simulator.h"
#include "tdlearn/solver.h"

#endif
