#pragma once

#include "dcr/core.hpp"
#include "dcr/fbp.hpp"
#include "dcr/metrics.hpp"
#include "dcr/phantom.hpp"
#include "dcr/projector.hpp"
#include "dcr/recon.hpp"
#include "dcr/simulate.hpp"
#include "dcr/tv.hpp"
#include "dcr/wce.hpp"
