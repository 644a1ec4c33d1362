#pragma once

#include "gridcalib/attribution.hpp"
#include "gridcalib/benchmark.hpp"
#include "gridcalib/calibration.hpp"
#include "gridcalib/clock.hpp"
#include "gridcalib/config.hpp"
#include "gridcalib/csv.hpp"
#include "gridcalib/emulation.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/meter_link.hpp"
#include "gridcalib/microgrid.hpp"
#include "gridcalib/query.hpp"
#include "gridcalib/report.hpp"
#include "gridcalib/scenario.hpp"
#include "gridcalib/serve.hpp"
#include "gridcalib/signals.hpp"
#include "gridcalib/timeseries.hpp"
#include "gridcalib/units.hpp"
#include "gridcalib/validation.hpp"
