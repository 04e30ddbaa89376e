#pragma once

#include "agentcrowd/metrics/aggregation.hpp"
#include "agentcrowd/metrics/alpha.hpp"
#include "agentcrowd/metrics/annotations.hpp"
#include "agentcrowd/metrics/classification.hpp"
#include "agentcrowd/metrics/pairwise.hpp"
#include "agentcrowd/metrics/report.hpp"
#include "agentcrowd/metrics/stats.hpp"
