#pragma once

#include "calibration.hpp"
#include "clustering.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "geom_raster.hpp"
#include "hash.hpp"
#include "io.hpp"
#include "methods.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "supervised.hpp"
#include "synthgen.hpp"
#include "tcm_core.hpp"
