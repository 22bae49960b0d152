#ifndef REGIMEKIT_REGIMEKIT_HPP
#define REGIMEKIT_REGIMEKIT_HPP

#include "regimekit/bds.hpp"
#include "regimekit/csv.hpp"
#include "regimekit/dates.hpp"
#include "regimekit/emd.hpp"
#include "regimekit/errors.hpp"
#include "regimekit/hhsa.hpp"
#include "regimekit/ingest.hpp"
#include "regimekit/metrics.hpp"
#include "regimekit/pipeline.hpp"
#include "regimekit/regimes.hpp"
#include "regimekit/spline.hpp"
#include "regimekit/states.hpp"
#include "regimekit/stats.hpp"
#include "regimekit/vlmc.hpp"

#endif
