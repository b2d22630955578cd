#pragma once

// Umbrella header for the full pipeline. Individual headers can be included
// on their own; only pipeline.hpp needs the vendored json.hpp on the include
// path.

#include "boxpose/detection.hpp"
#include "boxpose/geometry.hpp"
#include "boxpose/labelgen.hpp"
#include "boxpose/metrics.hpp"
#include "boxpose/pnp.hpp"
#include "boxpose/rng.hpp"
#include "boxpose/scenegen.hpp"
#include "boxpose/tensor.hpp"
#include "boxpose/tensorio.hpp"
