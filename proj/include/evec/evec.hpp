// evec/evec.hpp

// Copyright 2026  The evec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Everything in one include.

#pragma once

#include "evec/artifacts.hpp"
#include "evec/audio.hpp"
#include "evec/augment.hpp"
#include "evec/bottleneck.hpp"
#include "evec/common.hpp"
#include "evec/config.hpp"
#include "evec/corpus.hpp"
#include "evec/features.hpp"
#include "evec/gmm.hpp"
#include "evec/ivector.hpp"
#include "evec/lda.hpp"
#include "evec/metrics.hpp"
#include "evec/pipeline.hpp"
#include "evec/plda.hpp"
#include "evec/report.hpp"
#include "evec/ridge.hpp"
#include "evec/room_synth.hpp"
#include "evec/serialize.hpp"
#include "evec/wada.hpp"
