#include <array>
#include <cstring>
#include <fstream>

#include "internal.hpp"
#include "smallgeo/classify.hpp"
#include "smallgeo/unet/model.hpp"

namespace smallgeo {

namespace fs = std::filesystem;
using detail::ArtifactTracker;
using detail::StageClock;

namespace {

fs::path resolve_in(const PipelineConfig& p, const std::string& section, const std::string& key,
                    const std::string& fallback = "") {
    const auto value = p.source.get_string(section, key, fallback);
    if (value.empty()) return {};
    fs::path path(value);
    if (path.is_relative()) path = p.config_path.parent_path() / path;
    return path.lexically_normal();
}

std::string model_kind(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (in.gcount() == 4) {
        if (std::memcmp(magic.data(), "SGRF", 4) == 0) return "rf";
        if (std::memcmp(magic.data(), "SGSV", 4) == 0) return "svm";
        if (std::memcmp(magic.data(), "SGUN", 4) == 0) return "unet";
    }
    throw UnsupportedFormatError(path.string() + " is not a model file");
}

RunResult finish_stage(StageClock& clock, ArtifactTracker& files) {
    RunResult result;
    result.output = files.dir();
    result.artifacts = files.files();
    result.timings = clock.timings;
    files.commit();
    return result;
}

} // namespace

RunResult run_synth(const Config& c, const fs::path& base_dir, const Overrides& overrides) {
    StageClock clock;
    const auto spec = clock.run("config", [&] {
        auto s = scene_spec_from_config(c);
        s.validate();
        return s;
    });
    const std::uint64_t seed =
        overrides.seed ? *overrides.seed : c.get_u64("scene", "seed", c.get_u64("run", "seed", 42));
    fs::path out = overrides.out ? *overrides.out : fs::path(c.get_string("run", "output", "out"));
    if (out.is_relative() && !overrides.out) out = base_dir / out;
    const auto dir = clock.run("output", [&] { return detail::prepare_output(fs::absolute(out).lexically_normal()); });
    ArtifactTracker files(dir);
    const auto scene = clock.run("generate", [&] { return generate_scene(spec, seed); });
    clock.run("export", [&] {
        files.add("scene.hdr");
        files.add("scene.bsq");
        write_bandstack(scene.raster, files.path("scene"));
        files.add("truth.hdr");
        files.add("truth.bsq");
        files.add("truth.png");
        write_class_map(scene.truth, scene.schema, files.path("truth"));
        write_polygons_geojson(scene.polygons, files.add("polygons.geojson"));
        write_schema(scene.schema, files.add("schema.csv"));
        Config pipeline;
        pipeline.set("input", "raster", "scene.hdr");
        pipeline.set("input", "polygons", "polygons.geojson");
        pipeline.set("input", "schema", "schema.csv");
        pipeline.set("run", "pathway", "rf");
        pipeline.set("run", "output", "run");
        pipeline.set("run", "seed", std::to_string(seed));
        pipeline.save(files.add("pipeline.ini"));
    });
    return finish_stage(clock, files);
}

RunResult run_sample(const PipelineConfig& p) {
    validate_pipeline_config(p, false);
    StageClock clock;
    const auto dir = clock.run("output", [&] { return detail::prepare_output(p.output); });
    ArtifactTracker files(dir);
    auto in = clock.run("load", [&] { return detail::load_inputs(p); });
    auto split = clock.run("split", [&] {
        auto s = split_polygons(in.polygons, p.test_fraction, p.split_seed);
        write_polygons_geojson(s.train, files.add("train_polygons.geojson"));
        write_polygons_geojson(s.test, files.add("test_polygons.geojson"));
        return s;
    });
    clock.run("sample", [&] {
        const auto& r = in.raster;
        const auto train = rasterize_polygons_indexed(split.train, r.width(), r.height(), r.geotransform());
        const auto samples = sample_pixels(r, train.labels, p.n_per_class, p.sample_seed, train.polygon_index);
        write_samples_csv(samples, files.add("samples.csv"));
        write_class_stats_csv(class_band_stats(samples), in.schema, r.band_names(), files.add("class_stats.csv"));
    });
    return finish_stage(clock, files);
}

RunResult run_train(const PipelineConfig& p) {
    const std::string pathway = p.source.get_string("train", "pathway", p.pathway);
    if (pathway != "rf" && pathway != "svm" && pathway != "unet") {
        throw ValidationError("train needs [train] pathway (or [run] pathway) set to rf, svm or unet");
    }
    const fs::path samples_path = resolve_in(p, "train", "samples");
    const fs::path polygons_path = resolve_in(p, "train", "polygons", p.source.get_string("input", "polygons", ""));
    if (pathway == "unet") {
        detail::require_file(p.raster, "[input] raster");
        detail::require_file(p.schema, "[input] schema");
        detail::require_file(polygons_path, "[train] polygons");
    } else {
        detail::require_file(samples_path, "[train] samples");
    }
    StageClock clock;
    const auto dir = clock.run("output", [&] { return detail::prepare_output(p.output); });
    ArtifactTracker files(dir);
    const std::string model_file = "model_" + pathway + ".bin";
    if (pathway == "rf") {
        clock.run("train_rf", [&] { save_forest(train_forest(read_samples_csv(samples_path), p.rf), files.add(model_file)); });
    } else if (pathway == "svm") {
        clock.run("train_svm", [&] { save_svm(train_linear_svm(read_samples_csv(samples_path), p.svm), files.add(model_file)); });
    } else {
        clock.run("train_unet", [&] {
            const auto raster = read_bandstack(p.raster);
            const auto schema = read_schema(p.schema);
            const auto polygons = read_polygons_geojson(polygons_path);
            const auto labels = rasterize_polygons(polygons, raster.width(), raster.height(), raster.geotransform());
            check_labels_in_schema(labels, schema);
            const auto config = detail::unet_config_for(p, raster, schema);
            const auto patches = extract_patches(raster, &labels, config.patch_size);
            TrainOptions options;
            options.on_epoch = [&](int epoch, double loss) {
                if (epoch == 1 || epoch % 50 == 0 || epoch == config.epochs) {
                    log::info("unet epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
                }
            };
            const auto model = train_unet(patches, config, schema.ids(), options);
            save_unet(model, files.add(model_file));
            write_loss_history_csv(model.loss_history, files.add("loss_history.csv"));
        });
    }
    return finish_stage(clock, files);
}

RunResult run_predict(const PipelineConfig& p) {
    const fs::path model_path = resolve_in(p, "predict", "model");
    detail::require_file(model_path, "[predict] model");
    detail::require_file(p.raster, "[input] raster");
    detail::require_file(p.schema, "[input] schema");
    StageClock clock;
    const auto dir = clock.run("output", [&] { return detail::prepare_output(p.output); });
    ArtifactTracker files(dir);
    const auto in = clock.run("load", [&] { return detail::load_inputs(p, false); });
    const std::string kind = clock.run("load_model", [&] { return model_kind(model_path); });
    const auto labels = clock.run("predict_" + kind, [&] {
        if (kind == "rf") return predict_raster(load_forest(model_path), in.raster);
        if (kind == "svm") return predict_raster(load_svm(model_path), in.raster);
        return predict_scene(load_unet(model_path), in.raster);
    });
    clock.run("export", [&] {
        const std::string stem = "classmap_" + kind;
        files.add(stem + ".hdr");
        files.add(stem + ".bsq");
        files.add(stem + ".png");
        write_class_map(labels, in.schema, files.path(stem));
    });
    return finish_stage(clock, files);
}

RunResult run_evaluate(const PipelineConfig& p) {
    const fs::path prediction_path = resolve_in(p, "evaluate", "prediction");
    const fs::path truth_path = resolve_in(p, "evaluate", "truth");
    const fs::path polygons_path = resolve_in(p, "evaluate", "polygons");
    detail::require_file(header_path(prediction_path), "[evaluate] prediction");
    detail::require_file(p.schema, "[input] schema");
    if (truth_path.empty() == polygons_path.empty()) {
        throw ValidationError("evaluate needs exactly one of [evaluate] truth (class map) or polygons");
    }
    if (!truth_path.empty()) detail::require_file(header_path(truth_path), "[evaluate] truth");
    if (!polygons_path.empty()) detail::require_file(polygons_path, "[evaluate] polygons");
    const std::string name = p.source.get_string("evaluate", "name", "model");

    StageClock clock;
    const auto dir = clock.run("output", [&] { return detail::prepare_output(p.output); });
    ArtifactTracker files(dir);
    const auto schema = clock.run("load", [&] { return read_schema(p.schema); });
    const auto pred = clock.run("load", [&] { return read_class_map(prediction_path); });
    const auto truth = clock.run("load", [&] {
        if (!truth_path.empty()) return read_class_map(truth_path);
        return rasterize_polygons(read_polygons_geojson(polygons_path), pred.width(), pred.height(),
                                  pred.geotransform());
    });
    std::vector<ModelReport> reports;
    clock.run("evaluate", [&] {
        auto cm = confusion(pred, truth, schema.ids());
        auto m = metrics(cm);
        reports.push_back({name, std::move(cm), std::move(m)});
    });
    clock.run("report", [&] {
        auto json = files.add("report.json");
        auto table = files.add("report.txt");
        write_report(reports, schema, json, table);
    });
    auto result = finish_stage(clock, files);
    result.report_table = report_table(reports, schema);
    result.reports = std::move(reports);
    return result;
}

RunResult run_command(const std::string& command, const fs::path& config_path, const Overrides& overrides) {
    if (command == "synth") {
        const auto c = Config::load(config_path);
        return run_synth(c, fs::absolute(config_path).parent_path(), overrides);
    }
    const auto p = load_pipeline_config(config_path, overrides);
    if (command == "run") return run_pipeline(p);
    if (command == "compare") return run_compare(p);
    if (command == "sample") return run_sample(p);
    if (command == "train") return run_train(p);
    if (command == "predict") return run_predict(p);
    if (command == "evaluate") return run_evaluate(p);
    throw ValidationError("unknown command '" + command + "'");
}

} // namespace smallgeo
