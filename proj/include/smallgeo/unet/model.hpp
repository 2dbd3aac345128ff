#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "smallgeo/raster_store.hpp"
#include "smallgeo/unet/network.hpp"
#include "smallgeo/unet/patches.hpp"

namespace smallgeo {

// A trained (or freshly initialized) U-Net. Output channel k scores class
// classes[k]. Inputs are standardized per band with input_mean/input_scale
// before entering the network.
struct UNetModel {
    UNetConfig config;
    std::vector<std::uint8_t> classes;
    std::vector<float> input_mean;
    std::vector<float> input_scale;
    unet::BasicUNet<float> net;
    std::vector<double> loss_history; // mean training loss per epoch

    friend bool operator==(const UNetModel&, const UNetModel&) = default;
};

// classes defaults to 1..n_classes; its size must equal config.n_classes.
UNetModel unet_init(const UNetConfig& config, std::vector<std::uint8_t> classes = {});

// Standardizes raw patch values in place with the model's band statistics.
void normalize_inputs(const UNetModel& model, Tensor4<float>& batch);

// Logits (n, p, p, n_classes) for a raw (unstandardized) batch.
Tensor4<float> unet_forward(const UNetModel& model, const Tensor4<float>& batch, bool training,
                            std::uint64_t seed = 0);

struct TrainOptions {
    // Called after every epoch with (epoch, mean loss); may be empty.
    std::function<void(int, double)> on_epoch;
};

// Mini-batch SGD with momentum over the supervised patches, reshuffled every
// epoch. Band statistics are fitted on the valid pixels of all patches.
UNetModel train_unet(const PatchSet& patches, const UNetConfig& config, std::vector<std::uint8_t> classes = {},
                     const TrainOptions& options = {});

// Per-patch argmax class ids (n * p * p) in inference mode.
std::vector<std::uint8_t> predict_patches(const UNetModel& model, const PatchSet& patches);

// Full-scene classification: extract, classify, stitch, crop; nodata -> 0.
LabelRaster predict_scene(const UNetModel& model, const RasterStack& raster);

void save_unet(const UNetModel& model, std::ostream& out);
UNetModel load_unet(std::istream& in);
void save_unet(const UNetModel& model, const std::filesystem::path& path);
UNetModel load_unet(const std::filesystem::path& path);

// "epoch,mean_loss" rows, epochs numbered from 1.
void write_loss_history_csv(std::span<const double> history, const std::filesystem::path& path);

} // namespace smallgeo
