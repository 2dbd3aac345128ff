// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/resource.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../gradcheck.hpp"
#include "../oracles.hpp"
#include "smallgeo/errors.hpp"
#include "smallgeo/log.hpp"
#include "smallgeo/pipeline/pipeline.hpp"
#include "smallgeo/svm.hpp"
#include "smallgeo/synth.hpp"
#include "smallgeo/unet/patches.hpp"

using namespace smallgeo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

double class_f1(const ModelReport& r, std::uint8_t id) {
    const auto* c = r.metrics.find(id);
    return c == nullptr ? 0.0 : c->f1;
}

const ModelReport* report_for(const RunResult& r, const std::string& model) {
    for (const auto& m : r.reports) {
        if (m.model == model) return &m;
    }
    return nullptr;
}

// Synthesizes the default scene (seed 42) and returns the directory holding it.
fs::path make_scene(const fs::path& work, const std::string& name, bool texture) {
    const auto dir = work / name;
    write_text(work / (name + ".ini"), "[scene]\ntexture = " + std::string(texture ? "true" : "false") +
                                           "\nseed = 42\n[run]\noutput = " + name + "\n");
    run_command("synth", work / (name + ".ini"));
    return dir;
}

std::string inputs_section(const fs::path& scene) {
    return "[input]\nraster = " + (scene / "scene.hdr").string() + "\npolygons = " +
           (scene / "polygons.geojson").string() + "\nschema = " + (scene / "schema.csv").string() + "\n";
}

// Socket descriptors of this process, by fd number.
std::vector<std::string> socket_fds() {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator("/proc/self/fd")) {
        std::error_code ec;
        const auto target = fs::read_symlink(e.path(), ec);
        if (!ec && target.string().rfind("socket:", 0) == 0) out.push_back(e.path().filename().string() + "->" + target.string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct State {
    fs::path work;
    std::vector<std::string> inherited_sockets; // open before the suite started (e.g. from the test runner)
    fs::path a2_manifest;
    RunResult a2_result;
};

Outcome a1(State& s) {
    const auto scene = make_scene(s.work, "a1_scene", false);
    std::string detail;
    bool ok = true;
    for (const std::string pathway : {"rf", "svm"}) {
        const auto ini = s.work / ("a1_" + pathway + ".ini");
        write_text(ini, inputs_section(scene) + "[run]\npathway = " + pathway + "\nseed = 42\noutput = a1_" +
                            pathway + "\n");
        const auto t0 = Clock::now();
        const auto r = run_command("run", ini);
        const double secs = seconds_since(t0);
        const double f1 = r.reports.at(0).metrics.macro_f1;
        ok = ok && f1 >= 0.95 && secs <= 60.0;
        detail += pathway + " macro-F1 " + fmt("%.3f", f1) + " in " + fmt("%.2f", secs) + " s; ";
    }
    return {ok, detail + "need >= 0.95 and <= 60 s each"};
}

Outcome a2(State& s) {
    const auto scene = make_scene(s.work, "a2_scene", true);
    const auto ini = s.work / "a2_compare.ini";
    write_text(ini, inputs_section(scene) + "[run]\nseed = 42\noutput = a2_compare\n[unet]\nepochs = 300\n");
    const auto t0 = Clock::now();
    s.a2_result = run_command("compare", ini);
    const double secs = seconds_since(t0);
    s.a2_manifest = s.a2_result.manifest;
    double unet_secs = 0.0;
    for (const auto& t : s.a2_result.timings) {
        if (t.stage == "train_unet" || t.stage == "predict_unet" || t.stage == "evaluate_unet") unet_secs += t.seconds;
    }
    const std::uint8_t texture = 7;
    const double rf = class_f1(*report_for(s.a2_result, "rf"), texture);
    const double svm = class_f1(*report_for(s.a2_result, "svm"), texture);
    const double unet = class_f1(*report_for(s.a2_result, "unet"), texture);
    const bool ok = unet >= 0.75 && unet >= rf + 0.20 && unet_secs <= 900.0;
    return {ok, "texture F1 rf " + fmt("%.3f", rf) + ", svm " + fmt("%.3f", svm) + ", unet " + fmt("%.3f", unet) +
                    "; unet " + fmt("%.0f", unet_secs) + " s (compare " + fmt("%.0f", secs) +
                    " s); need unet >= 0.75, >= rf + 0.20, <= 900 s"};
}

Outcome a3(State&) {
    struct Check {
        const char* name;
        std::function<gradcheck::Result()> run;
    };
    UNetConfig net;
    net.patch_size = 4;
    net.depth = 3;
    net.base_channels = 2;
    net.in_channels = 3;
    net.n_classes = 3;
    const std::vector<Check> checks{
        {"conv3x3", [] { return gradcheck::conv(1, 3); }},
        {"conv1x1", [] { return gradcheck::conv(2, 1); }},
        {"relu", [] { return gradcheck::relu(3); }},
        {"pool", [] { return gradcheck::maxpool(4); }},
        {"upsample", [] { return gradcheck::upsample(5); }},
        {"concat", [] { return gradcheck::concat(6); }},
        {"dropout-off", [] { return gradcheck::dropout(7, 0.0); }},
        {"softmax-ce", [] { return gradcheck::softmax_ce(8); }},
        {"network", [&] { return gradcheck::network(net, 9); }},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : checks) {
        const double e = c.run().worst();
        ok = ok && e <= 1e-3;
        detail += std::string(c.name) + " " + fmt("%.1e", e) + ", ";
    }
    return {ok, detail + "need <= 1e-3"};
}

// Projected-gradient KKT violation rebuilt from alpha alone.
double kkt_violation(const BinaryProblem& p, const std::vector<double>& alpha, double C) {
    std::vector<double> w(static_cast<std::size_t>(p.d), 0.0);
    double bw = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (int k = 0; k < p.d; ++k) w[k] += alpha[i] * p.y[i] * p.row(i)[k];
        bw += alpha[i] * p.y[i];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double m = bw;
        for (int k = 0; k < p.d; ++k) m += w[k] * p.row(i)[k];
        const double g = p.y[i] * m - 1.0;
        double pg = g;
        if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
        if (alpha[i] >= C) pg = std::max(g, 0.0);
        worst = std::max(worst, std::abs(pg));
    }
    return worst;
}

Outcome a4(State&) {
    // Every pair of the texture scene's one-vs-one SVM, trained on polygon pixels.
    const auto scene = generate_scene(default_scene_spec(true), 42);
    const auto labels = rasterize_polygons(scene.polygons, 256, 256, scene.raster.geotransform());
    const auto samples = sample_pixels(scene.raster, labels, 500, 42);
    SvmConfig cfg;
    const auto trained = train_linear_svm_detailed(samples, cfg);
    double worst = 0.0;
    bool converged = true;
    for (std::size_t k = 0; k < trained.problems.size(); ++k) {
        converged = converged && trained.solutions[k].converged;
        worst = std::max(worst, kkt_violation(trained.problems[k], trained.solutions[k].alpha, cfg.C));
    }

    // 200-sample problem: the overlapping texture class against one parent.
    const auto small = sample_pixels(scene.raster, labels, 100, 7);
    std::vector<float> f;
    std::vector<std::uint8_t> y;
    for (std::size_t i = 0; i < small.size(); ++i) {
        if (small.label(i) != 3 && small.label(i) != 7) continue;
        f.insert(f.end(), small.row(i).begin(), small.row(i).end());
        y.push_back(small.label(i));
    }
    const SampleSet pair(small.n_features(), f, y);
    const auto problem = make_pair_problem(pair, fit_scaler(pair), 3, 7);
    const auto sol = solve_binary_svm(problem, {.C = cfg.C, .eps = cfg.eps, .record_trace = true});
    bool monotone = true;
    for (std::size_t i = 1; i < sol.objective_trace.size(); ++i) {
        monotone = monotone && sol.objective_trace[i] >= sol.objective_trace[i - 1] -
                                   1e-12 * std::max(1.0, std::abs(sol.objective_trace[i - 1]));
    }
    const bool ok = converged && worst <= cfg.eps && monotone && problem.size() == 200;
    return {ok, std::to_string(trained.problems.size()) + " pairs, max KKT violation " + fmt("%.2e", worst) +
                    " (eps 0.01); dual objective over " + std::to_string(sol.objective_trace.size()) + " passes " +
                    (monotone ? "nondecreasing" : "DECREASED") + " on " + std::to_string(problem.size()) +
                    " samples"};
}

Outcome a5(State&) {
    Rng rng(2024);
    const GeoTransform gt{1000.0, 1.0, 0.0, 2000.0, 0.0, -1.0};
    std::vector<LabeledPolygon> polys;
    for (int i = 0; i < 50; ++i) {
        const double cx = rng.uniform(1000, 1128), cy = rng.uniform(1872, 2000);
        const int n = 5 + static_cast<int>(rng.uniform_index(20));
        polys.push_back({static_cast<std::uint8_t>(1 + i % 255), "p",
                         oracle::star_ring(rng, cx, cy, rng.uniform(2, 10), rng.uniform(12, 45), n), {}});
    }
    std::size_t mismatches = 0;
    std::size_t labeled = 0;
    // Each polygon alone, then all of them stacked.
    for (std::size_t i = 0; i <= polys.size(); ++i) {
        const std::vector<LabeledPolygon> set =
            i < polys.size() ? std::vector<LabeledPolygon>{polys[i]} : polys;
        const auto got = rasterize_polygons(set, 128, 128, gt);
        const auto want = oracle::brute_force_labels(set, 128, 128, gt);
        for (std::size_t k = 0; k < want.size(); ++k) {
            mismatches += want[k] != got.labels()[k];
            labeled += i == polys.size() && want[k] != 0;
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatched pixels over 51 rasterizations (" +
                                 std::to_string(labeled) + " labeled in the stacked grid)"};
}

Outcome a6(State&) {
    bool ok = true;
    std::string detail;
    for (int size : {16, 64, 70, 1}) {
        Rng rng(static_cast<std::uint64_t>(size));
        std::vector<float> v(static_cast<std::size_t>(size) * size * 3);
        for (auto& x : v) x = static_cast<float>(rng.uniform01());
        const RasterStack raster(size, size, 3, v);
        LabelRaster labels(size, size);
        for (auto& l : labels.labels()) l = static_cast<std::uint8_t>(1 + rng.uniform_index(7));
        const auto ps = extract_patches(raster, &labels, 16);
        const auto back = stitch_patches(ps.origins, ps.targets, 16, size, size);
        std::size_t bad = 0;
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) bad += back.at(x, y) != labels.at(x, y);
        }
        // Input values too: every valid patch pixel holds the source pixel.
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto o = ps.origins[i];
            for (int py = 0; py < 16; ++py) {
                for (int px = 0; px < 16; ++px) {
                    if (ps.valid[(i * 16 + py) * 16 + px] == 0) continue;
                    for (int b = 0; b < 3; ++b) {
                        bad += ps.inputs.at(static_cast<int>(i), py, px, b) != raster.at(b, o.y0 + py, o.x0 + px);
                    }
                }
            }
        }
        ok = ok && bad == 0;
        detail += std::to_string(size) + "x" + std::to_string(size) + ": " + std::to_string(ps.size()) +
                  " patches, " + std::to_string(bad) + " mismatches; ";
    }
    return {ok, detail};
}

Outcome a7(State& s) {
    if (s.a2_manifest.empty()) return {false, "no manifest from A2"};
    std::vector<fs::path> outs;
    for (const char* name : {"a7_first", "a7_second"}) {
        Overrides o;
        o.out = s.work / name;
        outs.push_back(run_command("compare", s.a2_manifest, o).output);
    }
    std::vector<std::string> files{"report.json", "model_rf.bin", "model_svm.bin", "model_unet.bin"};
    std::string detail;
    bool ok = true;
    for (const auto& f : files) {
        const bool same = read_bytes(outs[0] / f) == read_bytes(outs[1] / f) && !read_bytes(outs[0] / f).empty();
        const bool same_as_a2 = read_bytes(outs[0] / f) == read_bytes(s.a2_result.output / f);
        ok = ok && same;
        detail += f + (same ? " identical" : " DIFFERS") + (same_as_a2 ? "" : " (differs from A2)") + "; ";
    }
    return {ok, detail};
}

Outcome a8(State& s) {
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    const double peak_mb = static_cast<double>(usage.ru_maxrss) / 1024.0;
    std::size_t opened = 0;
    for (const auto& fd : socket_fds()) {
        opened += std::find(s.inherited_sockets.begin(), s.inherited_sockets.end(), fd) == s.inherited_sockets.end();
    }
    return {peak_mb <= 1024.0 && opened == 0, "peak RSS " + fmt("%.0f", peak_mb) + " MB (need <= 1024), " +
                                                  std::to_string(opened) + " sockets opened by the suite (" +
                                                  std::to_string(s.inherited_sockets.size()) + " inherited)"};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance suite"};
    std::string work = (fs::temp_directory_path() / "smallgeo_acceptance").string();
    std::vector<std::string> only;
    app.add_option("--work", work, "scratch directory (recreated)");
    app.add_option("--only", only, "run only these criteria, e.g. A3 A5");
    CLI11_PARSE(app, argc, argv);

    log::set_level(log::Level::error);
    State state;
    state.inherited_sockets = socket_fds();
    state.work = fs::absolute(work);
    fs::remove_all(state.work);
    fs::create_directories(state.work);

    const std::vector<std::pair<std::string, std::function<Outcome(State&)>>> criteria{
        {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5}, {"A6", a6}, {"A7", a7}, {"A8", a8}};
    int failures = 0;
    for (const auto& [id, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome out;
        const auto t0 = Clock::now();
        try {
            out = fn(state);
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        failures += out.pass ? 0 : 1;
        std::printf("%s %s  %s [%.1f s]\n", id.c_str(), out.pass ? "PASS" : "FAIL", out.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
