#pragma once

#include "symc/caratheodory.hpp"
#include "symc/clustering.hpp"
#include "symc/compressor.hpp"
#include "symc/data.hpp"
#include "symc/dataset.hpp"
#include "symc/experiments.hpp"
#include "symc/io.hpp"
#include "symc/moments.hpp"
#include "symc/nn.hpp"
#include "symc/random.hpp"
#include "symc/report.hpp"
#include "symc/symfunc.hpp"
