#pragma once

#include "adam.hpp"
#include "closed_form.hpp"
#include "color.hpp"
#include "filters.hpp"
#include "fitter.hpp"
#include "harness.hpp"
#include "image.hpp"
#include "image_io.hpp"
#include "lut.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "palette.hpp"
#include "recipe.hpp"
#include "recipe_json.hpp"
#include "render.hpp"
#include "smooth.hpp"
