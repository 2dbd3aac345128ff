#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smallgeo/errors.hpp"
#include "smallgeo/random.hpp"
#include "smallgeo/unet/model.hpp"

using namespace smallgeo;
namespace fs = std::filesystem;

namespace {

RasterStack noise_raster(int w, int h, int bands, std::uint64_t seed, std::optional<float> nodata = std::nullopt) {
    Rng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(w) * h * bands);
    for (auto& x : v) x = static_cast<float>(rng.uniform01());
    return RasterStack(w, h, bands, std::move(v), kIdentityGeoTransform, nodata);
}

LabelRaster random_labels(int w, int h, int classes, std::uint64_t seed) {
    Rng rng(seed);
    LabelRaster l(w, h);
    for (auto& v : l.labels()) v = static_cast<std::uint8_t>(rng.uniform_index(classes + 1));
    return l;
}

// Class = 1 + index of the largest of the first three bands.
LabelRaster argmax_labels(const RasterStack& r) {
    LabelRaster l(r.width(), r.height());
    for (int y = 0; y < r.height(); ++y) {
        for (int x = 0; x < r.width(); ++x) {
            int best = 0;
            for (int b = 1; b < 3; ++b) {
                if (r.at(b, y, x) > r.at(best, y, x)) best = b;
            }
            l.set(x, y, static_cast<std::uint8_t>(best + 1));
        }
    }
    return l;
}

UNetConfig small_config(int bands, int classes) {
    UNetConfig c;
    c.patch_size = 16;
    c.depth = 3;
    c.base_channels = 8;
    c.in_channels = bands;
    c.n_classes = classes;
    c.epochs = 5;
    c.batch_size = 4;
    return c;
}

} // namespace

TEST(ReflectIndex, MirrorsWithoutRepeatingEdge) {
    EXPECT_EQ(reflect_index(5, 5), 3);
    EXPECT_EQ(reflect_index(6, 5), 2);
    EXPECT_EQ(reflect_index(8, 5), 0);
    EXPECT_EQ(reflect_index(9, 5), 1);
    EXPECT_EQ(reflect_index(-1, 5), 1);
    EXPECT_EQ(reflect_index(7, 1), 0);
    EXPECT_EQ(reflect_index(3, 2), 1);
}

TEST(Patches, CountsAndPadding) {
    auto r64 = noise_raster(64, 64, 2, 1);
    EXPECT_EQ(extract_patches(r64, nullptr).size(), 16u);
    auto r70 = noise_raster(70, 70, 2, 2);
    auto ps = extract_patches(r70, nullptr);
    ASSERT_EQ(ps.size(), 25u);
    // Last tile column covers x 64..79: six real columns, ten padding columns.
    const std::size_t last = 4;
    EXPECT_EQ(ps.origins[last], (PatchOrigin{64, 0}));
    for (int px = 0; px < 16; ++px) {
        EXPECT_EQ(ps.valid[last * 256 + px], px < 6 ? 1 : 0);
        const int sx = px < 6 ? 64 + px : reflect_index(64 + px, 70);
        EXPECT_EQ(ps.inputs.at(4, 0, px, 1), r70.at(1, 0, sx));
    }
    std::size_t valid = 0;
    for (auto v : ps.valid) valid += v;
    EXPECT_EQ(valid, 70u * 70u);
}

TEST(Patches, StitchInvertsExtract) {
    for (int size : {16, 64, 70, 1, 33}) {
        auto r = noise_raster(size, size + 3, 2, 3);
        auto l = random_labels(size, size + 3, 5, 4);
        auto ps = extract_patches(r, &l);
        auto back = stitch_patches(ps.origins, ps.targets, ps.patch_size, size, size + 3);
        EXPECT_EQ(back, l) << size;
    }
}

TEST(Patches, NodataIsZeroAndInvalid) {
    auto base = noise_raster(8, 8, 2, 5);
    std::vector<float> v(base.values().begin(), base.values().end());
    v[3] = -1.0f; // band 0, pixel (3, 0)
    RasterStack r(8, 8, 2, v, kIdentityGeoTransform, -1.0f);
    auto ps = extract_patches(r, nullptr, 8);
    EXPECT_EQ(ps.valid[3], 0);
    EXPECT_EQ(ps.inputs.at(0, 0, 3, 0), 0.0f);
    EXPECT_EQ(ps.inputs.at(0, 0, 3, 1), 0.0f);
}

TEST(Patches, RejectsMismatch) {
    auto r = noise_raster(8, 8, 1, 6);
    LabelRaster l(7, 8);
    EXPECT_THROW(extract_patches(r, &l), DimensionError);
}

TEST(UNetModel, MemorizesSinglePatch) {
    auto r = noise_raster(16, 16, 4, 7);
    auto l = argmax_labels(r);
    auto ps = extract_patches(r, &l);
    auto cfg = small_config(4, 3);
    cfg.epochs = 200;
    cfg.batch_size = 1;
    cfg.dropout_rate = 0.0;
    auto m = train_unet(ps, cfg);
    ASSERT_EQ(m.loss_history.size(), 200u);
    EXPECT_LT(m.loss_history.back(), 0.1 * m.loss_history.front());
    auto pred = predict_patches(m, ps);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == ps.targets[i];
    EXPECT_GT(static_cast<double>(ok) / static_cast<double>(pred.size()), 0.95);
}

TEST(UNetModel, TrainingIsDeterministic) {
    auto r = noise_raster(32, 32, 3, 8);
    auto l = argmax_labels(r);
    auto ps = extract_patches(r, &l);
    auto cfg = small_config(3, 3);
    std::vector<std::pair<int, double>> seen;
    TrainOptions opt;
    opt.on_epoch = [&](int e, double loss) { seen.emplace_back(e, loss); };
    auto a = train_unet(ps, cfg, {}, opt);
    auto b = train_unet(ps, cfg);
    EXPECT_EQ(a, b);
    ASSERT_EQ(seen.size(), 5u);
    EXPECT_EQ(seen[0].first, 1);
    EXPECT_EQ(seen[4].second, a.loss_history[4]);
    cfg.seed = 7;
    EXPECT_NE(train_unet(ps, cfg).net, a.net);
}

TEST(UNetModel, SkipsUnsupervisedPatchesAndRejectsNone) {
    auto r = noise_raster(32, 16, 2, 9);
    LabelRaster none(32, 16);
    auto ps = extract_patches(r, &none);
    EXPECT_THROW(train_unet(ps, small_config(2, 2)), NoSupervisionError);
}

TEST(UNetModel, PredictSceneMasksNodataAndKeepsSize) {
    auto base = noise_raster(20, 18, 3, 10);
    std::vector<float> v(base.values().begin(), base.values().end());
    v[5] = -7.0f;
    RasterStack r(20, 18, 3, v, {10.0, 2.0, 0.0, 50.0, 0.0, -2.0}, -7.0f);
    auto m = unet_init(small_config(3, 2), {4, 9});
    m.input_mean = {0.5f, 0.5f, 0.5f};
    m.input_scale = {1.0f, 1.0f, 1.0f};
    auto out = predict_scene(m, r);
    EXPECT_EQ(out.width(), 20);
    EXPECT_EQ(out.height(), 18);
    EXPECT_EQ(out.geotransform(), r.geotransform());
    EXPECT_EQ(out.at(5, 0), 0);
    for (int y = 0; y < 18; ++y) {
        for (int x = 0; x < 20; ++x) {
            if (x == 5 && y == 0) continue;
            EXPECT_TRUE(out.at(x, y) == 4 || out.at(x, y) == 9);
        }
    }
    RasterStack wrong = noise_raster(16, 16, 2, 11);
    EXPECT_THROW(predict_scene(m, wrong), DimensionError);
}

TEST(UNetModel, SaveLoadRoundTrip) {
    auto r = noise_raster(16, 16, 3, 12);
    auto l = argmax_labels(r);
    auto m = train_unet(extract_patches(r, &l), small_config(3, 3));
    std::stringstream ss;
    save_unet(m, ss);
    auto back = load_unet(ss);
    EXPECT_EQ(back, m);
    std::string bytes;
    {
        std::stringstream again;
        save_unet(m, again);
        bytes = again.str();
    }
    std::stringstream truncated(bytes.substr(0, bytes.size() - 9));
    EXPECT_THROW(load_unet(truncated), Error);
}

TEST(UNetModel, LossHistoryCsv) {
    auto dir = fs::temp_directory_path() / "smallgeo_unet_loss";
    fs::create_directories(dir);
    std::vector<double> h{0.5, 0.25};
    write_loss_history_csv(h, dir / "loss.csv");
    std::ifstream in(dir / "loss.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), "epoch,mean_loss\n1,0.5\n2,0.25\n");
}

TEST(UNetModel, InitValidatesClasses) {
    EXPECT_THROW(unet_init(small_config(3, 2), {1, 2, 3}), ValidationError);
    EXPECT_THROW(unet_init(small_config(3, 2), {2, 1}), ValidationError);
    EXPECT_EQ(unet_init(small_config(3, 2)).classes, (std::vector<std::uint8_t>{1, 2}));
}
