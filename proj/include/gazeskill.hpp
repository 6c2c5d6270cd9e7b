/**
 * @file gazeskill.hpp
 * @brief Umbrella header. The TCP server (POSIX only) is included separately
 * from gazeskill/tcp_server.hpp.
 */
#pragma once

#include "gazeskill/error.hpp"
#include "gazeskill/types.hpp"
#include "gazeskill/gaze_io.hpp"
#include "gazeskill/fixation_detect.hpp"
#include "gazeskill/duration_stats.hpp"
#include "gazeskill/density.hpp"
#include "gazeskill/special_functions.hpp"
#include "gazeskill/stats_tests.hpp"
#include "gazeskill/skill_inference.hpp"
#include "gazeskill/simgaze.hpp"
#include "gazeskill/report.hpp"
#include "gazeskill/svg_plot.hpp"
#include "gazeskill/stream_service.hpp"
