#pragma once

#include "bqda/error.hpp"
#include "bqda/special.hpp"
#include "bqda/spd_matrix.hpp"
#include "bqda/distributions.hpp"
#include "bqda/niw.hpp"
#include "bqda/classifiers.hpp"
#include "bqda/data_cube.hpp"
#include "bqda/split.hpp"
#include "bqda/synth.hpp"
#include "bqda/summary.hpp"
#include "bqda/metrics.hpp"
#include "bqda/pca.hpp"
#include "bqda/ensemble.hpp"
#include "bqda/model_io.hpp"
#include "bqda/report.hpp"
