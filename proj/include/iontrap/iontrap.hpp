#pragma once

// Everything at once. Individual headers can be included on their own.

#include "iontrap/commands.hpp"
#include "iontrap/config.hpp"
#include "iontrap/correlator.hpp"
#include "iontrap/error.hpp"
#include "iontrap/fitting.hpp"
#include "iontrap/interferometer.hpp"
#include "iontrap/least_squares.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/simulator.hpp"
#include "iontrap/spectrum.hpp"
#include "iontrap/tag_file.hpp"
#include "iontrap/time_tag.hpp"
#include "iontrap/units.hpp"
