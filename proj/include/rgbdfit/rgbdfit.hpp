#pragma once

// Plane fitting for organized depth images.

#include "rgbdfit/bench.hpp"
#include "rgbdfit/camera.hpp"
#include "rgbdfit/error.hpp"
#include "rgbdfit/fitting.hpp"
#include "rgbdfit/formulation.hpp"
#include "rgbdfit/integral.hpp"
#include "rgbdfit/io.hpp"
#include "rgbdfit/lattice.hpp"
#include "rgbdfit/linalg.hpp"
#include "rgbdfit/segment.hpp"
#include "rgbdfit/synth.hpp"
