#include <iostream>

#include <CLI11.hpp>

#include "smallgeo/errors.hpp"
#include "smallgeo/log.hpp"
#include "smallgeo/pipeline/pipeline.hpp"

namespace {

const char* kCommands[][2] = {
    {"synth", "generate a synthetic scene, its labels and a starter config"},
    {"sample", "split polygons and draw training pixels"},
    {"train", "train one model from samples (rf, svm) or polygons (unet)"},
    {"predict", "classify a raster with a saved model"},
    {"evaluate", "score a class map against truth"},
    {"compare", "run rf, svm and unet on one shared split"},
    {"run", "run one pathway end to end"},
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"smallgeo: land-cover segmentation with random forest, linear SVM and U-Net"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool verbose = false;
    bool quiet = false;

    for (const auto& [name, help] : kCommands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "config file (or a run manifest)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides [run] output)");
        sub->add_option("--seed", seed, "master seed (overrides [run] seed)");
        sub->add_flag("-v,--verbose", verbose, "log stage progress");
        sub->add_flag("-q,--quiet", quiet, "log errors only");
    }
    CLI11_PARSE(app, argc, argv);

    smallgeo::log::set_level(quiet ? smallgeo::log::Level::error
                                   : (verbose ? smallgeo::log::Level::debug : smallgeo::log::Level::info));
    const std::string command = app.get_subcommands().front()->get_name();
    const auto* sub = app.get_subcommand(command);
    smallgeo::Overrides overrides;
    if (sub->count("--out") > 0) overrides.out = out_dir;
    if (sub->count("--seed") > 0) overrides.seed = seed;

    try {
        const auto result = smallgeo::run_command(command, config_path, overrides);
        for (const auto& a : result.artifacts) std::cout << a.string() << '\n';
        if (!result.report_table.empty()) std::cout << '\n' << result.report_table;
        return 0;
    } catch (const smallgeo::StageError& e) {
        std::cerr << "smallgeo " << command << ": stage '" << e.stage() << "' failed: " << e.what() << '\n';
        return 1;
    } catch (const smallgeo::ValidationError& e) {
        std::cerr << "smallgeo " << command << ": [config] " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "smallgeo " << command << ": " << e.what() << '\n';
        return 3;
    }
}
