#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smallgeo/eval.hpp"
#include "smallgeo/forest.hpp"
#include "smallgeo/pipeline/config.hpp"
#include "smallgeo/svm.hpp"
#include "smallgeo/synth.hpp"
#include "smallgeo/unet/network.hpp"

namespace smallgeo {

// Command-line overrides applied on top of a config file.
struct Overrides {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed; // master seed; stage seeds not set explicitly follow it
};

struct PipelineConfig {
    Config source;                     // the parsed file, for stage-specific sections
    std::filesystem::path config_path; // absolute
    std::filesystem::path raster;      // band-stack header (absolute)
    std::filesystem::path polygons;    // canonical polygon GeoJSON
    std::filesystem::path schema;      // class schema CSV
    std::string pathway;               // rf, svm or unet; empty when not given
    std::filesystem::path output;
    std::uint64_t seed = 42;
    double test_fraction = 0.25;
    std::uint64_t split_seed = 42;
    std::size_t n_per_class = 500;
    std::uint64_t sample_seed = 42;
    ForestConfig rf;
    SvmConfig svm;
    UNetConfig unet; // in_channels and n_classes are filled from the inputs at run time
    // From a manifest's [input_hashes] section; verified before a rerun.
    std::vector<std::pair<std::string, std::string>> expected_hashes;
};

// Reads a pipeline config (or a manifest written by a previous run). Relative
// paths resolve against the file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path, const Overrides& overrides = {});

// Checks that inputs exist (and match recorded hashes) and that the pathway
// and hyperparameters are valid. Throws ValidationError.
void validate_pipeline_config(const PipelineConfig& config, bool require_pathway);

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunResult {
    std::filesystem::path output;
    std::filesystem::path manifest;           // empty for stage commands without one
    std::vector<std::filesystem::path> artifacts;
    std::vector<ModelReport> reports;
    std::string report_table; // plain-text comparison table, when a report was written
    std::vector<StageTiming> timings;
};

// split -> rasterize -> sample -> train -> predict -> evaluate -> export, for
// config.pathway. Failures raise StageError naming the stage; files written
// by the failed run are removed.
RunResult run_pipeline(const PipelineConfig& config);

// All three pathways on one shared split and sample set; one report with
// columns rf, svm, unet.
RunResult run_compare(const PipelineConfig& config);

// Stage commands. Each reads its inputs from the config and writes to the
// output directory.
RunResult run_synth(const Config& config, const std::filesystem::path& base_dir, const Overrides& overrides);
RunResult run_sample(const PipelineConfig& config);
RunResult run_train(const PipelineConfig& config);
RunResult run_predict(const PipelineConfig& config);
RunResult run_evaluate(const PipelineConfig& config);

// Dispatches one of synth, sample, train, predict, evaluate, compare, run.
RunResult run_command(const std::string& command, const std::filesystem::path& config_path,
                      const Overrides& overrides = {});

// Scene description from a [scene] section (plus optional [class.N] and
// [texture.N] sections replacing the default classes).
SceneSpec scene_spec_from_config(const Config& config);

} // namespace smallgeo
