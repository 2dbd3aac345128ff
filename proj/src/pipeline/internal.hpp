#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "smallgeo/errors.hpp"
#include "smallgeo/log.hpp"
#include "smallgeo/pipeline/pipeline.hpp"
#include "smallgeo/raster_store.hpp"
#include "smallgeo/vector_labels.hpp"

namespace smallgeo::detail {

// Files written by a run; removed again if the run fails.
class ArtifactTracker {
  public:
    explicit ArtifactTracker(std::filesystem::path dir) : dir_(std::move(dir)) {}
    ArtifactTracker(const ArtifactTracker&) = delete;
    ArtifactTracker& operator=(const ArtifactTracker&) = delete;
    ~ArtifactTracker() {
        if (!committed_) rollback();
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    // Records a file about to be written and returns its path.
    std::filesystem::path add(const std::string& name) {
        files_.push_back(dir_ / name);
        return files_.back();
    }
    const std::vector<std::filesystem::path>& files() const noexcept { return files_; }
    void commit() { committed_ = true; }

  private:
    void rollback() noexcept {
        for (const auto& f : files_) {
            std::error_code ec;
            std::filesystem::remove(f, ec);
        }
    }

    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
    bool committed_ = false;
};

// Runs named stages, recording wall-clock time and tagging failures.
class StageClock {
  public:
    template <class F>
    decltype(auto) run(const std::string& stage, F&& f) {
        log::info("stage: " + stage);
        const auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
                f();
                record(stage, start);
            } else {
                auto result = f();
                record(stage, start);
                return result;
            }
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage, e.what());
        }
    }

    std::vector<StageTiming> timings;

  private:
    void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        timings.push_back({stage, dt.count()});
    }
};

struct Inputs {
    RasterStack raster;
    ClassSchema schema;
    std::vector<LabeledPolygon> polygons;
};

Inputs load_inputs(const PipelineConfig& config, bool with_polygons = true);

// Throws ValidationError unless the file exists.
void require_file(const std::filesystem::path& path, const std::string& what);

// Input files and their manifest names.
std::vector<std::pair<std::string, std::filesystem::path>> input_files(const PipelineConfig& config);

std::filesystem::path prepare_output(const std::filesystem::path& dir);

// Resolved configuration, hashes, artifacts and timings in the config dialect.
Config build_manifest(const PipelineConfig& config, const std::string& command,
                      const std::vector<std::filesystem::path>& artifacts, const std::vector<StageTiming>& timings);

UNetConfig unet_config_for(const PipelineConfig& config, const RasterStack& raster, const ClassSchema& schema);

} // namespace smallgeo::detail
