#pragma once

#include "axleval/annotations.hpp"
#include "axleval/compose.hpp"
#include "axleval/errors.hpp"
#include "axleval/matching.hpp"
#include "axleval/metrics.hpp"
#include "axleval/report.hpp"
#include "axleval/stats.hpp"
#include "axleval/types.hpp"
