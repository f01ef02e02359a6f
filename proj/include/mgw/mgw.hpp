#pragma once

#include "mgw/data_pipeline.hpp"
#include "mgw/distributions.hpp"
#include "mgw/errors.hpp"
#include "mgw/estimators.hpp"
#include "mgw/model_selection.hpp"
#include "mgw/random.hpp"
#include "mgw/report.hpp"
#include "mgw/special_functions.hpp"
