#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include "smallgeo/binary_io.hpp"
#include "smallgeo/errors.hpp"
#include "smallgeo/log.hpp"
#include "smallgeo/random.hpp"
#include "smallgeo/text.hpp"
#include "smallgeo/unet/layers.hpp"
#include "smallgeo/unet/model.hpp"

namespace smallgeo {

namespace {

constexpr std::uint32_t kUNetFormatVersion = 1;
constexpr int kInferenceBatch = 64;

void check_classes(const UNetConfig& config, const std::vector<std::uint8_t>& classes) {
    if (classes.size() != static_cast<std::size_t>(config.n_classes)) {
        throw ValidationError("U-Net has " + std::to_string(config.n_classes) + " outputs but " +
                              std::to_string(classes.size()) + " class ids");
    }
    if (!std::is_sorted(classes.begin(), classes.end()) ||
        std::adjacent_find(classes.begin(), classes.end()) != classes.end() ||
        std::find(classes.begin(), classes.end(), 0) != classes.end()) {
        throw ValidationError("U-Net class ids must be sorted, unique and nonzero");
    }
}

void check_patch_shape(const UNetConfig& config, const PatchSet& patches) {
    if (patches.patch_size != config.patch_size) {
        throw DimensionError("patches are " + std::to_string(patches.patch_size) + " px, model expects " +
                             std::to_string(config.patch_size));
    }
    if (patches.size() > 0 && patches.inputs.c != config.in_channels) {
        throw DimensionError("patches have " + std::to_string(patches.inputs.c) + " bands, model expects " +
                             std::to_string(config.in_channels));
    }
}

void fit_band_statistics(const PatchSet& patches, std::vector<float>& mean, std::vector<float>& scale) {
    const auto c = static_cast<std::size_t>(patches.inputs.c);
    std::vector<double> sum(c, 0.0);
    std::vector<double> sq(c, 0.0);
    std::size_t count = 0;
    for (std::size_t p = 0; p < patches.valid.size(); ++p) {
        if (patches.valid[p] == 0) continue;
        ++count;
        for (std::size_t b = 0; b < c; ++b) sum[b] += patches.inputs.values[p * c + b];
    }
    if (count == 0) throw NoSupervisionError("patches contain no valid pixel");
    mean.assign(c, 0.0f);
    scale.assign(c, 1.0f);
    std::vector<double> m(c);
    for (std::size_t b = 0; b < c; ++b) m[b] = sum[b] / static_cast<double>(count);
    for (std::size_t p = 0; p < patches.valid.size(); ++p) {
        if (patches.valid[p] == 0) continue;
        for (std::size_t b = 0; b < c; ++b) {
            const double d = patches.inputs.values[p * c + b] - m[b];
            sq[b] += d * d;
        }
    }
    for (std::size_t b = 0; b < c; ++b) {
        const double sd = std::sqrt(sq[b] / static_cast<double>(count));
        mean[b] = static_cast<float>(m[b]);
        scale[b] = sd > 0.0 ? static_cast<float>(sd) : 1.0f;
    }
}

void argmax_labels(const UNetModel& model, const Tensor4<float>& logits, std::uint8_t* out) {
    const auto c = static_cast<std::size_t>(logits.c);
    for (std::size_t p = 0; p < logits.pixels(); ++p) {
        const float* z = &logits.values[p * c];
        out[p] = model.classes[static_cast<std::size_t>(std::max_element(z, z + c) - z)];
    }
}

} // namespace

UNetModel unet_init(const UNetConfig& config, std::vector<std::uint8_t> classes) {
    config.validate();
    if (classes.empty()) {
        classes.resize(static_cast<std::size_t>(config.n_classes));
        std::iota(classes.begin(), classes.end(), std::uint8_t{1});
    }
    check_classes(config, classes);
    const auto c = static_cast<std::size_t>(config.in_channels);
    return UNetModel{config, std::move(classes), std::vector<float>(c, 0.0f), std::vector<float>(c, 1.0f),
                     unet::BasicUNet<float>::initialized(config), {}};
}

void normalize_inputs(const UNetModel& model, Tensor4<float>& batch) {
    const auto c = static_cast<std::size_t>(batch.c);
    if (c != model.input_mean.size()) throw DimensionError("batch channel count does not match the model");
    for (std::size_t i = 0; i < batch.values.size(); ++i) {
        const std::size_t b = i % c;
        batch.values[i] = (batch.values[i] - model.input_mean[b]) / model.input_scale[b];
    }
}

Tensor4<float> unet_forward(const UNetModel& model, const Tensor4<float>& batch, bool training, std::uint64_t seed) {
    Tensor4<float> x = batch;
    if (x.c != model.config.in_channels) throw DimensionError("batch channel count does not match the model");
    normalize_inputs(model, x);
    unet::Executor<float> exec(model.net);
    return exec.forward(x, training, seed);
}

UNetModel train_unet(const PatchSet& patches, const UNetConfig& config, std::vector<std::uint8_t> classes,
                     const TrainOptions& options) {
    UNetModel model = unet_init(config, std::move(classes));
    check_patch_shape(config, patches);

    std::array<std::uint8_t, 256> index_of{};
    for (std::size_t k = 0; k < model.classes.size(); ++k) index_of[model.classes[k]] = static_cast<std::uint8_t>(k + 1);
    const std::size_t pp = patches.patch_pixels();
    std::vector<std::uint8_t> targets(patches.targets.size(), 0);
    std::vector<std::size_t> supervised;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        bool any = false;
        for (std::size_t k = i * pp; k < (i + 1) * pp; ++k) {
            if (patches.valid[k] == 0 || patches.targets[k] == 0) continue;
            if (index_of[patches.targets[k]] == 0) {
                throw SchemaMismatchError("patch target class " + std::to_string(patches.targets[k]) +
                                          " is not a model class");
            }
            targets[k] = index_of[patches.targets[k]];
            any = true;
        }
        if (any) supervised.push_back(i);
    }
    if (supervised.empty()) throw NoSupervisionError("no patch contains a valid labeled pixel");

    fit_band_statistics(patches, model.input_mean, model.input_scale);
    Tensor4<float> inputs = patches.inputs;
    normalize_inputs(model, inputs);

    const int p = config.patch_size;
    const int c = config.in_channels;
    const std::size_t sample_len = pp * static_cast<std::size_t>(c);
    std::vector<float>& params = model.net.params();
    std::vector<float> velocity(params.size(), 0.0f);
    const auto lr = static_cast<float>(config.learning_rate);
    const auto mu = static_cast<float>(config.momentum);
    Rng shuffle_rng(derive_seed(config.seed, 1));
    Rng dropout_rng(derive_seed(config.seed, 2));
    unet::Executor<float> exec(model.net);
    Tensor4<float> batch;
    std::vector<std::uint8_t> batch_targets;
    std::vector<std::uint8_t> batch_valid;
    std::vector<std::size_t> order = supervised;
    model.loss_history.reserve(static_cast<std::size_t>(config.epochs));

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        double weighted = 0.0;
        std::size_t pixels = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t nb = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
            batch.resize(static_cast<int>(nb), p, p, c);
            batch_targets.resize(nb * pp);
            batch_valid.resize(nb * pp);
            for (std::size_t j = 0; j < nb; ++j) {
                const std::size_t src = order[start + j];
                std::copy_n(inputs.values.begin() + static_cast<std::ptrdiff_t>(src * sample_len), sample_len,
                            batch.values.begin() + static_cast<std::ptrdiff_t>(j * sample_len));
                std::copy_n(targets.begin() + static_cast<std::ptrdiff_t>(src * pp), pp,
                            batch_targets.begin() + static_cast<std::ptrdiff_t>(j * pp));
                std::copy_n(patches.valid.begin() + static_cast<std::ptrdiff_t>(src * pp), pp,
                            batch_valid.begin() + static_cast<std::ptrdiff_t>(j * pp));
            }
            const auto& logits = exec.forward(batch, true, dropout_rng.next_u64());
            auto ce = unet::masked_cross_entropy(logits, batch_targets, batch_valid);
            if (!std::isfinite(ce.loss)) {
                throw TrainingDivergedError("U-Net training diverged in epoch " + std::to_string(epoch));
            }
            auto grads = exec.backward(ce.grad);
            if (config.grad_clip > 0.0) {
                double sq = 0.0;
                for (float g : grads) sq += static_cast<double>(g) * g;
                const double norm = std::sqrt(sq);
                if (norm > config.grad_clip) {
                    const auto shrink = static_cast<float>(config.grad_clip / norm);
                    for (float& g : grads) g *= shrink;
                }
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                velocity[i] = mu * velocity[i] + grads[i];
                params[i] -= lr * velocity[i];
            }
            weighted += ce.loss * static_cast<double>(ce.included);
            pixels += ce.included;
        }
        const double mean_loss = weighted / static_cast<double>(pixels);
        if (!std::isfinite(mean_loss) ||
            std::any_of(params.begin(), params.end(), [](float v) { return !std::isfinite(v); })) {
            throw TrainingDivergedError("U-Net training diverged in epoch " + std::to_string(epoch));
        }
        model.loss_history.push_back(mean_loss);
        if (options.on_epoch) options.on_epoch(epoch, mean_loss);
    }
    return model;
}

std::vector<std::uint8_t> predict_patches(const UNetModel& model, const PatchSet& patches) {
    check_patch_shape(model.config, patches);
    const std::size_t pp = patches.patch_pixels();
    const std::size_t sample_len = pp * static_cast<std::size_t>(patches.inputs.c);
    std::vector<std::uint8_t> out(patches.size() * pp, 0);
    unet::Executor<float> exec(model.net);
    Tensor4<float> batch;
    for (std::size_t start = 0; start < patches.size(); start += kInferenceBatch) {
        const std::size_t nb = std::min(patches.size() - start, static_cast<std::size_t>(kInferenceBatch));
        batch.resize(static_cast<int>(nb), patches.patch_size, patches.patch_size, patches.inputs.c);
        std::copy_n(patches.inputs.values.begin() + static_cast<std::ptrdiff_t>(start * sample_len), nb * sample_len,
                    batch.values.begin());
        normalize_inputs(model, batch);
        argmax_labels(model, exec.forward(batch, false), out.data() + start * pp);
    }
    return out;
}

LabelRaster predict_scene(const UNetModel& model, const RasterStack& raster) {
    if (raster.bands() != model.config.in_channels) {
        throw DimensionError("raster has " + std::to_string(raster.bands()) + " bands, model expects " +
                             std::to_string(model.config.in_channels));
    }
    const auto patches = extract_patches(raster, nullptr, model.config.patch_size);
    auto labels = predict_patches(model, patches);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (patches.valid[k] == 0) labels[k] = 0;
    }
    return stitch_patches(patches.origins, labels, patches.patch_size, raster.width(), raster.height(),
                          raster.geotransform());
}

void save_unet(const UNetModel& model, std::ostream& out) {
    BinaryWriter w(out);
    w.put_magic("SGUN");
    w.put<std::uint32_t>(kUNetFormatVersion);
    const auto& c = model.config;
    for (int v : {c.patch_size, c.in_channels, c.n_classes, c.depth, c.base_channels, c.epochs, c.batch_size}) {
        w.put<std::int32_t>(v);
    }
    w.put(c.dropout_rate);
    w.put(c.learning_rate);
    w.put(c.momentum);
    w.put(c.grad_clip);
    w.put<std::uint64_t>(c.seed);
    w.put_vector(model.classes);
    w.put_vector(model.input_mean);
    w.put_vector(model.input_scale);
    w.put_vector(model.net.params());
    w.put_vector(model.loss_history);
    w.check();
}

UNetModel load_unet(std::istream& in) {
    BinaryReader r(in);
    r.expect_magic("SGUN", "U-Net model");
    const auto version = r.get<std::uint32_t>();
    if (version != kUNetFormatVersion) {
        throw UnsupportedFormatError("unsupported U-Net model version " + std::to_string(version));
    }
    UNetConfig c;
    for (int* v : {&c.patch_size, &c.in_channels, &c.n_classes, &c.depth, &c.base_channels, &c.epochs,
                   &c.batch_size}) {
        *v = r.get<std::int32_t>();
    }
    c.dropout_rate = r.get<double>();
    c.learning_rate = r.get<double>();
    c.momentum = r.get<double>();
    c.grad_clip = r.get<double>();
    c.seed = r.get<std::uint64_t>();
    try {
        c.validate();
        auto classes = r.get_vector<std::uint8_t>(255);
        check_classes(c, classes);
        auto mean = r.get_vector<float>(4096);
        auto scale = r.get_vector<float>(4096);
        if (mean.size() != static_cast<std::size_t>(c.in_channels) || scale.size() != mean.size()) {
            throw ValidationError("band statistics do not match in_channels");
        }
        unet::BasicUNet<float> net(c);
        auto params = r.get_vector<float>(1ull << 30);
        if (params.size() != net.params().size()) {
            throw ValidationError("parameter count " + std::to_string(params.size()) + " does not match " +
                                  std::to_string(net.params().size()));
        }
        net.params() = std::move(params);
        auto history = r.get_vector<double>(1ull << 26);
        return UNetModel{c, std::move(classes), std::move(mean), std::move(scale), std::move(net), std::move(history)};
    } catch (const ValidationError& e) {
        throw CorruptFileError(std::string("invalid U-Net model: ") + e.what());
    }
}

void save_unet(const UNetModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    save_unet(model, out);
}

UNetModel load_unet(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_unet(in);
}

void write_loss_history_csv(std::span<const double> history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,mean_loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) out << (i + 1) << ',' << text::format_double(history[i]) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace smallgeo
