#pragma once

// Umbrella header.

#include "errors.hpp"
#include "random.hpp"
#include "binary_io.hpp"
#include "imaging.hpp"
#include "stereo.hpp"
#include "synth.hpp"
#include "nn.hpp"
#include "classifier.hpp"
#include "pipeline.hpp"
