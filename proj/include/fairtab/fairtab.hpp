#pragma once

// Umbrella header.

#include "fairtab/autodiff.hpp"
#include "fairtab/dataset.hpp"
#include "fairtab/errors.hpp"
#include "fairtab/importance.hpp"
#include "fairtab/io.hpp"
#include "fairtab/metrics.hpp"
#include "fairtab/model.hpp"
#include "fairtab/objectives.hpp"
#include "fairtab/report.hpp"
#include "fairtab/schema.hpp"
#include "fairtab/synth.hpp"
#include "fairtab/tensor.hpp"
#include "fairtab/training.hpp"

namespace fairtab {
inline constexpr const char* kVersion = "0.1.0";
}
