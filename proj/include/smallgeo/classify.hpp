#pragma once

#include "smallgeo/forest.hpp"
#include "smallgeo/raster_store.hpp"
#include "smallgeo/svm.hpp"

namespace smallgeo {

// Classifies every pixel independently. Nodata pixels (and NaN values) map to 0.
LabelRaster predict_raster(const ForestModel& model, const RasterStack& raster);
LabelRaster predict_raster(const SvmModel& model, const RasterStack& raster);

} // namespace smallgeo
