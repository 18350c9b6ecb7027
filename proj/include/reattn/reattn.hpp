#pragma once

#include "reattn/aggregate.hpp"
#include "reattn/core.hpp"
#include "reattn/eval.hpp"
#include "reattn/io.hpp"
#include "reattn/normalize.hpp"
#include "reattn/pipeline.hpp"
#include "reattn/reweight.hpp"
#include "reattn/synth.hpp"
#include "reattn/tokenmatch.hpp"
