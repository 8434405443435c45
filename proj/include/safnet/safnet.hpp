#pragma once

#include "safnet/checkpoint.hpp"
#include "safnet/chunks.hpp"
#include "safnet/config.hpp"
#include "safnet/core.hpp"
#include "safnet/csm.hpp"
#include "safnet/experiments.hpp"
#include "safnet/fusion.hpp"
#include "safnet/gsm.hpp"
#include "safnet/io.hpp"
#include "safnet/metrics.hpp"
#include "safnet/nn.hpp"
#include "safnet/parallel.hpp"
#include "safnet/pipeline.hpp"
#include "safnet/projection.hpp"
#include "safnet/random.hpp"
#include "safnet/scene_io.hpp"
#include "safnet/spatial_index.hpp"
#include "safnet/synth.hpp"
#include "safnet/train.hpp"
#include "safnet/view_selection.hpp"
