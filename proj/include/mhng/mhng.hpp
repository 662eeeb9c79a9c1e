#pragma once

#include "mhng/analysis.hpp"
#include "mhng/common.hpp"
#include "mhng/engine.hpp"
#include "mhng/event_log.hpp"
#include "mhng/inter_gm.hpp"
#include "mhng/parallel.hpp"
#include "mhng/participant.hpp"
#include "mhng/png.hpp"
#include "mhng/session.hpp"
#include "mhng/stimulus.hpp"
