#pragma once

// Umbrella header. The command-line front end (cli.hpp, io.hpp) needs the
// vendored CLI11 and nlohmann/json headers and is not included here.

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/special.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/radial.hpp"
#include "trunc_ellipse/mvnprob.hpp"
#include "trunc_ellipse/density.hpp"
#include "trunc_ellipse/polar.hpp"
#include "trunc_ellipse/sampling.hpp"
#include "trunc_ellipse/inference.hpp"
#include "trunc_ellipse/dcor.hpp"
#include "trunc_ellipse/verify.hpp"
