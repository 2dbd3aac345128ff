#include <cmath>

#include "smallgeo/classify.hpp"
#include "smallgeo/errors.hpp"

namespace smallgeo {

namespace {

template <class Predict>
LabelRaster classify_pixels(const RasterStack& raster, int n_features, Predict predict) {
    if (raster.bands() != n_features) {
        throw DimensionError("raster has " + std::to_string(raster.bands()) + " bands, model expects " +
                             std::to_string(n_features));
    }
    LabelRaster out(raster.width(), raster.height(), raster.geotransform());
    std::vector<float> px(static_cast<std::size_t>(n_features));
    for (int y = 0; y < raster.height(); ++y) {
        for (int x = 0; x < raster.width(); ++x) {
            if (raster.is_nodata(x, y)) continue;
            raster.pixel(x, y, px);
            bool finite = true;
            for (float v : px) finite = finite && !std::isnan(v);
            if (finite) out.set(x, y, predict(px));
        }
    }
    return out;
}

} // namespace

LabelRaster predict_raster(const ForestModel& model, const RasterStack& raster) {
    return classify_pixels(raster, model.n_features(),
                           [&](std::span<const float> px) { return forest_predict(model, px).class_id; });
}

LabelRaster predict_raster(const SvmModel& model, const RasterStack& raster) {
    std::vector<float> z(static_cast<std::size_t>(model.n_features()));
    return classify_pixels(raster, model.n_features(), [&](std::span<const float> px) {
        model.scaler().apply(px, z);
        return svm_predict_scaled(model, z).class_id;
    });
}

} // namespace smallgeo
