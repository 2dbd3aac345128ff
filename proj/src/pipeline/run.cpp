#include "internal.hpp"
#include "smallgeo/classify.hpp"
#include "smallgeo/unet/model.hpp"

namespace smallgeo {

namespace fs = std::filesystem;
using detail::ArtifactTracker;
using detail::StageClock;

namespace {

struct Prepared {
    detail::Inputs in;
    PolygonSplit split;
    Rasterization train;
    LabelRaster test;
};

Prepared prepare(const PipelineConfig& p, StageClock& clock) {
    auto in = clock.run("load", [&] { return detail::load_inputs(p); });
    auto split = clock.run("split", [&] { return split_polygons(in.polygons, p.test_fraction, p.split_seed); });
    const auto& r = in.raster;
    auto train = clock.run("rasterize", [&] {
        return rasterize_polygons_indexed(split.train, r.width(), r.height(), r.geotransform());
    });
    auto test = rasterize_polygons(split.test, r.width(), r.height(), r.geotransform());
    return Prepared{std::move(in), std::move(split), std::move(train), std::move(test)};
}

SampleSet draw_samples(const PipelineConfig& p, const Prepared& prep, StageClock& clock, ArtifactTracker& files) {
    return clock.run("sample", [&] {
        auto samples =
            sample_pixels(prep.in.raster, prep.train.labels, p.n_per_class, p.sample_seed, prep.train.polygon_index);
        write_class_stats_csv(class_band_stats(samples), prep.in.schema, prep.in.raster.band_names(),
                              files.add("class_stats.csv"));
        return samples;
    });
}

void log_progress(int epoch, double loss, int epochs) {
    if (epoch == 1 || epoch % 50 == 0 || epoch == epochs) {
        log::info("unet epoch " + std::to_string(epoch) + "/" + std::to_string(epochs) + " loss " +
                  std::to_string(loss));
    }
}

// Trains one pathway, classifies the full raster and scores it on the test pixels.
ModelReport execute_pathway(const std::string& pathway, const PipelineConfig& p, const Prepared& prep,
                            const SampleSet* samples, StageClock& clock, ArtifactTracker& files) {
    const auto& raster = prep.in.raster;
    const auto& schema = prep.in.schema;
    const std::string model_file = "model_" + pathway + ".bin";

    auto prediction = [&]() -> LabelRaster {
        if (pathway == "rf") {
            auto model = clock.run("train_rf", [&] {
                auto m = train_forest(*samples, p.rf);
                save_forest(m, files.add(model_file));
                return m;
            });
            return clock.run("predict_rf", [&] { return predict_raster(model, raster); });
        }
        if (pathway == "svm") {
            auto model = clock.run("train_svm", [&] {
                auto m = train_linear_svm(*samples, p.svm);
                save_svm(m, files.add(model_file));
                return m;
            });
            return clock.run("predict_svm", [&] { return predict_raster(model, raster); });
        }
        auto model = clock.run("train_unet", [&] {
            const auto config = detail::unet_config_for(p, raster, schema);
            const auto patches = extract_patches(raster, &prep.train.labels, config.patch_size);
            TrainOptions options;
            options.on_epoch = [&](int epoch, double loss) { log_progress(epoch, loss, config.epochs); };
            auto m = train_unet(patches, config, schema.ids(), options);
            save_unet(m, files.add(model_file));
            write_loss_history_csv(m.loss_history, files.add("loss_history.csv"));
            return m;
        });
        return clock.run("predict_unet", [&] { return predict_scene(model, raster); });
    }();

    return clock.run("evaluate_" + pathway, [&] {
        const std::string stem = "classmap_" + pathway;
        files.add(stem + ".hdr");
        files.add(stem + ".bsq");
        files.add(stem + ".png");
        write_class_map(prediction, schema, files.path(stem));
        auto cm = confusion(prediction, prep.test, schema.ids());
        auto m = metrics(cm);
        return ModelReport{pathway, std::move(cm), std::move(m)};
    });
}

RunResult finish(const PipelineConfig& p, const std::string& command, const ClassSchema& schema,
                 std::vector<ModelReport> reports, StageClock& clock, ArtifactTracker& files) {
    clock.run("report", [&] {
        auto json = files.add("report.json");
        auto table = files.add("report.txt");
        write_report(reports, schema, json, table);
    });
    RunResult result;
    result.output = files.dir();
    result.artifacts = files.files();
    result.timings = clock.timings;
    result.report_table = report_table(reports, schema);
    result.reports = std::move(reports);
    clock.run("manifest", [&] {
        const auto manifest = detail::build_manifest(p, command, result.artifacts, result.timings);
        result.manifest = files.add("manifest.ini");
        manifest.save(result.manifest);
    });
    files.commit();
    return result;
}

} // namespace

RunResult run_pipeline(const PipelineConfig& p) {
    validate_pipeline_config(p, true);
    StageClock clock;
    const auto dir = clock.run("output", [&] { return detail::prepare_output(p.output); });
    ArtifactTracker files(dir);
    auto prep = prepare(p, clock);
    std::optional<SampleSet> samples;
    if (p.pathway != "unet") samples = draw_samples(p, prep, clock, files);
    std::vector<ModelReport> reports;
    reports.push_back(execute_pathway(p.pathway, p, prep, samples ? &*samples : nullptr, clock, files));
    return finish(p, "run", prep.in.schema, std::move(reports), clock, files);
}

RunResult run_compare(const PipelineConfig& p) {
    validate_pipeline_config(p, false);
    StageClock clock;
    const auto dir = clock.run("output", [&] { return detail::prepare_output(p.output); });
    ArtifactTracker files(dir);
    auto prep = prepare(p, clock);
    const auto samples = draw_samples(p, prep, clock, files);
    std::vector<ModelReport> reports;
    for (const std::string pathway : {"rf", "svm", "unet"}) {
        reports.push_back(execute_pathway(pathway, p, prep, &samples, clock, files));
    }
    return finish(p, "compare", prep.in.schema, std::move(reports), clock, files);
}

} // namespace smallgeo
