/*
 * Copyright 2026 The dsvae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "dsvae/adam.hpp"
#include "dsvae/autodiff.hpp"
#include "dsvae/checkpoint.hpp"
#include "dsvae/config.hpp"
#include "dsvae/dataset.hpp"
#include "dsvae/distributions.hpp"
#include "dsvae/error.hpp"
#include "dsvae/figures.hpp"
#include "dsvae/inference.hpp"
#include "dsvae/layers.hpp"
#include "dsvae/model.hpp"
#include "dsvae/network.hpp"
#include "dsvae/packed.hpp"
#include "dsvae/parameters.hpp"
#include "dsvae/png.hpp"
#include "dsvae/preprocess.hpp"
#include "dsvae/probe.hpp"
#include "dsvae/rng.hpp"
#include "dsvae/sampling.hpp"
#include "dsvae/shapes.hpp"
#include "dsvae/tensor.hpp"
#include "dsvae/trainer.hpp"
