#pragma once

#include "cmx/hash.hpp"
#include "cmx/io.hpp"
#include "cmx/sketch.hpp"
#include "cmx/empirical.hpp"
#include "cmx/logconcave.hpp"
#include "cmx/statistic.hpp"
#include "cmx/intervals.hpp"
#include "cmx/estimators.hpp"
#include "cmx/regression.hpp"
#include "cmx/tuning.hpp"
#include "cmx/simlab.hpp"
