#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "smallgeo/errors.hpp"
#include "smallgeo/pipeline/pipeline.hpp"

using namespace smallgeo;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("smallgeo_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Synthesizes a small scene into dir/data and returns the generated pipeline.ini.
fs::path small_scene(const fs::path& dir, bool texture = false) {
    write_text(dir / "synth.ini", "[scene]\ntexture = " + std::string(texture ? "true" : "false") +
                                      "\nwidth = 96\nheight = 96\nregions_per_class = 2\nseed = 3\n"
                                      "[run]\noutput = data\n");
    run_command("synth", dir / "synth.ini");
    return dir / "data" / "pipeline.ini";
}

void append(const fs::path& path, const std::string& text) { std::ofstream(path, std::ios::app) << text; }

} // namespace

TEST(Config, ParsesSectionsAndRejectsDuplicates) {
    auto c = Config::parse("# comment\n[run]\nseed = 7\npathway = svm ; trailing\n[svm]\nC = 0.5\n");
    EXPECT_EQ(c.get_u64("run", "seed", 0), 7u);
    EXPECT_EQ(c.get_double("svm", "C", 1.0), 0.5);
    EXPECT_EQ(c.get_string("run", "missing", "x"), "x");
    EXPECT_EQ(c.sections(), (std::vector<std::string>{"run", "svm"}));
    EXPECT_THROW(Config::parse("[a]\nk = 1\nk = 2\n"), ValidationError);
    EXPECT_THROW(c.get_int("run", "pathway", 0), ValidationError);
    EXPECT_THROW(c.require_string("svm", "eps"), ValidationError);
}

TEST(Config, SaveParseRoundTrip) {
    Config c;
    c.set("b", "x", "1");
    c.set("a", "y", "two words");
    auto back = Config::parse(c.to_string());
    EXPECT_EQ(back.to_string(), c.to_string());
    EXPECT_EQ(back.sections(), (std::vector<std::string>{"b", "a"}));
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Pipeline, RunWritesArtifactsAndManifest) {
    auto dir = fresh_dir("run");
    auto ini = small_scene(dir);
    append(ini, "[rf]\nn_trees = 20\n[samples]\nn_per_class = 200\n");
    auto result = run_command("run", ini);
    std::set<std::string> names;
    for (const auto& a : result.artifacts) names.insert(a.filename().string());
    EXPECT_EQ(names, (std::set<std::string>{"class_stats.csv", "model_rf.bin", "classmap_rf.hdr", "classmap_rf.bsq",
                                            "classmap_rf.png", "report.json", "report.txt"}));
    EXPECT_EQ(result.manifest.filename(), "manifest.ini");
    EXPECT_TRUE(fs::exists(result.manifest));
    for (const auto& a : result.artifacts) EXPECT_TRUE(fs::exists(a)) << a;
    ASSERT_EQ(result.reports.size(), 1u);
    EXPECT_GT(result.reports[0].metrics.macro_f1, 0.95);

    auto manifest = Config::load(result.manifest);
    EXPECT_EQ(manifest.get_string("manifest", "hash_algorithm", ""), "sha256");
    for (const auto& [name, hash] : manifest.entries("artifacts")) {
        EXPECT_EQ(sha256_file(result.output / name), hash) << name;
    }
    EXPECT_TRUE(manifest.has("input_hashes", "raster_payload"));
    EXPECT_TRUE(manifest.has("timings", "train_rf_seconds"));
}

TEST(Pipeline, ManifestRerunReproducesReport) {
    auto dir = fresh_dir("rerun");
    auto ini = small_scene(dir);
    append(ini, "[rf]\nn_trees = 10\n[samples]\nn_per_class = 100\n");
    auto first = run_command("run", ini);
    Overrides o;
    o.out = dir / "again";
    auto second = run_command("run", first.manifest, o);
    EXPECT_EQ(read_text(first.output / "report.json"), read_text(second.output / "report.json"));
    EXPECT_EQ(read_text(first.output / "model_rf.bin"), read_text(second.output / "model_rf.bin"));
}

TEST(Pipeline, TamperedInputFailsHashCheck) {
    auto dir = fresh_dir("tamper");
    auto ini = small_scene(dir);
    append(ini, "[rf]\nn_trees = 5\n[samples]\nn_per_class = 50\n");
    auto first = run_command("run", ini);
    append(dir / "data" / "schema.csv", "\n");
    EXPECT_THROW(run_command("run", first.manifest), ValidationError);
}

TEST(Pipeline, MissingRasterIsValidationError) {
    auto dir = fresh_dir("missing");
    write_text(dir / "p.ini", "[input]\nraster = nope.hdr\npolygons = p.geojson\nschema = s.csv\n[run]\npathway = rf\n");
    try {
        run_command("run", dir / "p.ini");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("raster"), std::string::npos);
    }
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Pipeline, UnknownPathwayAndBadHyperparameters) {
    auto dir = fresh_dir("badcfg");
    auto ini = small_scene(dir);
    auto cfg = load_pipeline_config(ini);
    cfg.pathway = "knn";
    EXPECT_THROW(validate_pipeline_config(cfg, true), ValidationError);
    cfg = load_pipeline_config(ini);
    cfg.unet.patch_size = 12;
    EXPECT_THROW(validate_pipeline_config(cfg, true), ValidationError);
}

TEST(Pipeline, FailedStageRemovesPartialOutput) {
    auto dir = fresh_dir("rollback");
    auto ini = small_scene(dir);
    // A polygon class missing from the schema fails after the output exists.
    auto schema = read_text(dir / "data" / "schema.csv");
    write_text(dir / "data" / "schema.csv", schema.substr(0, schema.rfind('\n', schema.size() - 2) + 1));
    try {
        run_command("run", ini);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_FALSE(e.stage().empty());
    }
    const auto out = dir / "data" / "run";
    if (fs::exists(out)) {
        EXPECT_TRUE(fs::is_empty(out));
    }
}

TEST(Pipeline, EvaluatePredictionAgainstItselfIsPerfect) {
    auto dir = fresh_dir("evaluate");
    small_scene(dir);
    write_text(dir / "eval.ini", "[input]\nschema = data/schema.csv\n[evaluate]\nprediction = data/truth.hdr\n"
                                 "truth = data/truth.hdr\nname = oracle\n[run]\noutput = eval\n");
    auto r = run_command("evaluate", dir / "eval.ini");
    ASSERT_EQ(r.reports.size(), 1u);
    for (const auto& c : r.reports[0].metrics.classes) {
        EXPECT_EQ(c.precision, 1.0);
        EXPECT_EQ(c.recall, 1.0);
        EXPECT_EQ(c.f1, 1.0);
    }
    auto doc = nlohmann::json::parse(read_text(r.output / "report.json"));
    EXPECT_EQ(doc["results"][0]["macro"]["f1"], 1.0);
}

TEST(Pipeline, StageCommandsChain) {
    auto dir = fresh_dir("stages");
    auto ini = small_scene(dir);
    const auto data = dir / "data";
    append(ini, "[samples]\nn_per_class = 100\n");
    Overrides o;
    o.out = data / "s";
    run_command("sample", ini, o);
    EXPECT_TRUE(fs::exists(data / "s" / "samples.csv"));
    EXPECT_TRUE(fs::exists(data / "s" / "test_polygons.geojson"));

    write_text(data / "train.ini", read_text(ini) + "[train]\npathway = svm\nsamples = s/samples.csv\n");
    o.out = data / "t";
    auto tr = run_command("train", data / "train.ini", o);
    EXPECT_TRUE(fs::exists(data / "t" / "model_svm.bin"));

    write_text(data / "predict.ini", read_text(ini) + "[predict]\nmodel = t/model_svm.bin\n");
    o.out = data / "p";
    auto pr = run_command("predict", data / "predict.ini", o);
    fs::path classmap;
    for (const auto& a : pr.artifacts) {
        if (a.extension() == ".hdr") classmap = a;
    }
    ASSERT_FALSE(classmap.empty());

    write_text(data / "evaluate.ini", read_text(ini) + "[evaluate]\nprediction = " + classmap.string() +
                                          "\npolygons = s/test_polygons.geojson\nname = svm\n");
    o.out = data / "e";
    auto ev = run_command("evaluate", data / "evaluate.ini", o);
    ASSERT_EQ(ev.reports.size(), 1u);
    EXPECT_GT(ev.reports[0].metrics.macro_f1, 0.95);
}

TEST(Pipeline, SeedOverrideMovesUnpinnedStageSeeds) {
    auto dir = fresh_dir("seed");
    auto ini = small_scene(dir);
    Overrides o;
    o.seed = 99;
    auto p = load_pipeline_config(ini, o);
    EXPECT_EQ(p.seed, 99u);
    EXPECT_EQ(p.rf.seed, 99u);
    append(ini, "[rf]\nseed = 5\n");
    p = load_pipeline_config(ini, o);
    EXPECT_EQ(p.rf.seed, 5u);
    EXPECT_EQ(p.svm.seed, 99u);
}

TEST(Pipeline, SceneSpecFromConfig) {
    auto c = Config::parse("[scene]\ntexture = false\nwidth = 64\nheight = 32\nbands = 8\n"
                           "[class.9]\nname = lake\nmean = 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1\n"
                           "std = 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01\n");
    auto spec = scene_spec_from_config(c);
    EXPECT_EQ(spec.width, 64);
    EXPECT_EQ(spec.height, 32);
    ASSERT_EQ(spec.classes.size(), 1u);
    EXPECT_EQ(spec.classes[0].class_id, 9);
    EXPECT_TRUE(spec.texture_classes.empty());
}
