// end-to-end checks of the fgwarp binary: exit codes, determinism, and the
// on-disk artifacts of every subcommand. The binary path comes from the build.
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fgwarp/detector.hpp"
#include "fgwarp/flownet.hpp"
#include "fgwarp/image_io.hpp"
#include "fgwarp/io_util.hpp"
#include "testutil.hpp"

using namespace fgwarp;
using namespace testutil;

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FGWARP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    const std::vector<std::uint8_t> b = read_file_bytes(p);
    return std::string(b.begin(), b.end());
}

// sorted relative paths and their bytes, for whole-tree comparisons
std::vector<std::pair<std::string, std::vector<std::uint8_t>>> tree_bytes(const fs::path& root) {
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out.emplace_back(fs::relative(e.path(), root).string(), read_file_bytes(e.path()));
    std::sort(out.begin(), out.end());
    return out;
}

void write_config(const fs::path& p, const std::string& extra = "") {
    std::ofstream f(p);
    f << "width_low = 4\nwidth_mid = 8\nwidth_high = 8\ninput_size = 24\n" << extra;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage errors exit with code 2") {
    TempDir dir("cli_usage");
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("gen-data --out " + (dir.path / "x").string() + " --preset bogus") == 2);
    CHECK(run_cli("gen-data") == 2);  // --out is required
    CHECK(run_cli("gen-data --out " + (dir.path / "x").string() + " --size 8") == 2);

    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run_cli("gen-data --out " + ds + " --videos 1 --frames 2 --size 24") == 0);
    const std::string rep = (dir.path / "rep.txt").string();
    CHECK(run_cli("eval --data " + ds + " --ckpt " + (dir.path / "nockpt").string() + " --out " +
                  rep) == 2);
    CHECK(run_cli("eval --data " + ds + " --out " + rep) == 2);  // no --ckpt, no oracle
    CHECK(run_cli("eval --data " + ds + " --oracle --oracle-invert --out " + rep) == 2);
}

TEST_CASE("I/O errors exit with code 3") {
    TempDir dir("cli_io");
    CHECK(run_cli("warp-demo --frame-a " + (dir.path / "no.ppm").string() + " --frame-b " +
                  (dir.path / "no2.ppm").string() + " --out " + (dir.path / "wd").string()) == 3);
    CHECK(run_cli("train --data " + (dir.path / "missing").string() + " --out " +
                  (dir.path / "ck").string()) == 3);

    // an output root blocked by a regular file
    atomic_write_text(dir.path / "blocker", "x");
    CHECK(run_cli("gen-data --out " + (dir.path / "blocker" / "ds").string() +
                  " --videos 1 --frames 2 --size 24") == 3);
}

TEST_CASE("non-finite training loss exits with code 4") {
    TempDir dir("cli_numeric");
    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run_cli("gen-data --out " + ds + " --videos 1 --frames 2 --size 24") == 0);
    write_config(dir.path / "cfg.txt", "base_lr = 1e30\n");
    CHECK(run_cli("train --data " + ds + " --config " + (dir.path / "cfg.txt").string() +
                  " --out " + (dir.path / "ck").string() + " --iters 50") == 4);
    // the failed run leaves no checkpoint manifest behind
    CHECK(!fs::exists(dir.path / "ck" / "manifest.txt"));
}

TEST_CASE("gen-data: deterministic trees, seed position independent") {
    TempDir dir("cli_gen");
    const std::string common = " --videos 2 --frames 3 --size 24 --preset default";
    REQUIRE(run_cli("gen-data --out " + (dir.path / "a").string() + common + " --seed 3") == 0);
    REQUIRE(run_cli("--seed 3 gen-data --out " + (dir.path / "b").string() + common) == 0);
    REQUIRE(run_cli("gen-data --out " + (dir.path / "c").string() + common + " --seed 4") == 0);

    const auto ta = tree_bytes(dir.path / "a"), tb = tree_bytes(dir.path / "b"),
               tc = tree_bytes(dir.path / "c");
    CHECK(ta == tb);
    REQUIRE(ta.size() == tc.size());
    bool any_differs = false;
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (ta[i].second != tc[i].second) any_differs = true;
    CHECK(any_differs);

    // expected layout for 2 videos x 3 frames
    for (const char* f :
         {"manifest.txt", "v000/frames/0002.ppm", "v001/masks/0000.pgm", "v001/flow/0001.flo"})
        CHECK(fs::exists(dir.path / "a" / f));
}

TEST_CASE("gen-data: small-shadow areas stay below two percent") {
    TempDir dir("cli_small");
    REQUIRE(run_cli("gen-data --out " + (dir.path / "ds").string() +
                    " --preset small-shadow --videos 6 --frames 2 --size 48 --seed 12") == 0);
    std::istringstream manifest(slurp(dir.path / "ds" / "manifest.txt"));
    std::string word;
    int fracs = 0;
    while (manifest >> word)
        if (word == "frac") {
            double frac = -1.0;
            REQUIRE(static_cast<bool>(manifest >> frac));
            CHECK(frac > 0.0);
            CHECK(frac < 0.02);
            ++fracs;
        }
    CHECK(fracs == 6);
}

TEST_CASE("train --iters 0 checkpoints the untouched initialization") {
    TempDir dir("cli_train0");
    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run_cli("gen-data --out " + ds + " --videos 1 --frames 2 --size 24 --seed 2") == 0);
    write_config(dir.path / "cfg.txt");
    REQUIRE(run_cli("train --data " + ds + " --config " + (dir.path / "cfg.txt").string() +
                    " --out " + (dir.path / "ck").string() + " --iters 0 --seed 7") == 0);

    CHECK(slurp(dir.path / "ck" / "loss_trace.txt").empty());

    DetectorParams got = load_checkpoint((dir.path / "ck").string());
    Rng rng(7);
    DetectorParams want = init_detector_params(BackboneConfig{4, 8, 8, 2}, rng);
    auto gv = state_views(got), wv = state_views(want);
    REQUIRE(gv.size() == wv.size());
    for (std::size_t s = 0; s < gv.size(); ++s) {
        CHECK(gv[s].name == wv[s].name);
        REQUIRE(gv[s].size == wv[s].size);
        for (std::size_t i = 0; i < gv[s].size; ++i) CHECK(gv[s].data[i] == wv[s].data[i]);
    }
}

TEST_CASE("train: trace length and bit-identical reruns") {
    TempDir dir("cli_train");
    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run_cli("gen-data --out " + ds + " --videos 2 --frames 3 --size 24 --seed 8") == 0);
    write_config(dir.path / "cfg.txt");
    const std::string base = "train --data " + ds + " --config " +
                             (dir.path / "cfg.txt").string() + " --iters 3 --seed 5 --out ";
    REQUIRE(run_cli(base + (dir.path / "ck1").string()) == 0);
    REQUIRE(run_cli(base + (dir.path / "ck2").string()) == 0);

    const std::string trace = slurp(dir.path / "ck1" / "loss_trace.txt");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 3);
    CHECK(tree_bytes(dir.path / "ck1") == tree_bytes(dir.path / "ck2"));
}

TEST_CASE("eval: oracle modes bracket the metric") {
    TempDir dir("cli_oracle");
    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run_cli("gen-data --out " + ds + " --videos 2 --frames 3 --size 32 --seed 9") == 0);
    const std::string rep = (dir.path / "rep.txt").string();

    REQUIRE(run_cli("eval --data " + ds + " --oracle --out " + rep) == 0);
    CHECK(slurp(rep).starts_with("ber = 0.000000\n"));

    REQUIRE(run_cli("eval --data " + ds + " --oracle-invert --out " + rep) == 0);
    CHECK(slurp(rep).starts_with("ber = 100.000000\n"));
}

TEST_CASE("eval and infer against a real checkpoint") {
    TempDir dir("cli_eval");
    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run_cli("gen-data --out " + ds + " --videos 2 --frames 3 --size 32 --seed 10") == 0);
    write_config(dir.path / "cfg.txt");
    const std::string ck = (dir.path / "ck").string();
    REQUIRE(run_cli("train --data " + ds + " --config " + (dir.path / "cfg.txt").string() +
                    " --out " + ck + " --iters 2 --seed 1") == 0);

    const std::string rep = (dir.path / "rep.txt").string();
    REQUIRE(run_cli("eval --data " + ds + " --ckpt " + ck + " --out " + rep +
                    " --input-size 24 --dump-masks " + (dir.path / "md").string()) == 0);
    const std::string text = slurp(rep);
    CHECK(text.find("frames = 6\n") != std::string::npos);
    CHECK(text.find("videos = 2\n") != std::string::npos);

    // dumped masks are binary images at native resolution
    const Tensor4 dumped = read_image(dir.path / "md" / "v000" / "0002.pgm");
    CHECK(dumped.shape() == Shape4{1, 1, 32, 32});
    for (std::size_t i = 0; i < dumped.size(); ++i)
        CHECK((dumped.data()[i] == 0.0 || dumped.data()[i] == 1.0));

    REQUIRE(run_cli("infer --data " + ds + " --ckpt " + ck + " --out " +
                    (dir.path / "soft").string() + " --input-size 24") == 0);
    const Tensor4 soft = read_image(dir.path / "soft" / "v001" / "0000.pgm");
    CHECK(soft.shape() == Shape4{1, 1, 32, 32});

    REQUIRE(run_cli("infer --data " + ds + " --ckpt " + ck + " --out " +
                    (dir.path / "hard").string() + " --input-size 24 --binarize") == 0);
    const Tensor4 hard = read_image(dir.path / "hard" / "v001" / "0000.pgm");
    for (std::size_t i = 0; i < hard.size(); ++i)
        CHECK((hard.data()[i] == 0.0 || hard.data()[i] == 1.0));
}

TEST_CASE("warp-demo: zero flow on identical frames is an exact copy") {
    TempDir dir("cli_warp");
    const Tensor4 frame = random_tensor({1, 3, 20, 28}, 5100, 0.0, 1.0);
    write_ppm(dir.path / "a.ppm", frame);
    write_ppm(dir.path / "b.ppm", frame);
    FlowField zero(1, 20, 28);
    write_flo((dir.path / "z.flo").string(), zero);

    REQUIRE(run_cli("warp-demo --frame-a " + (dir.path / "a.ppm").string() + " --frame-b " +
                    (dir.path / "b.ppm").string() + " --flo " + (dir.path / "z.flo").string() +
                    " --out " + (dir.path / "wd").string()) == 0);

    CHECK(read_file_bytes(dir.path / "wd" / "warped.ppm") ==
          read_file_bytes(dir.path / "a.ppm"));
    const Tensor4 heat = read_image(dir.path / "wd" / "heatmap.pgm");
    CHECK(heat.shape() == Shape4{1, 1, 20, 28});
    for (std::size_t i = 0; i < heat.size(); ++i) CHECK(heat.data()[i] == 0.0);
}

TEST_CASE("warp-demo: block-matching path produces outputs") {
    TempDir dir("cli_warp_bm");
    const std::string ds = (dir.path / "ds").string();
    REQUIRE(run_cli("gen-data --out " + ds + " --videos 1 --frames 2 --size 32 --seed 13") == 0);
    REQUIRE(run_cli("warp-demo --frame-a " + (dir.path / "ds/v000/frames/0000.ppm").string() +
                    " --frame-b " + (dir.path / "ds/v000/frames/0001.ppm").string() + " --out " +
                    (dir.path / "wd").string()) == 0);
    CHECK(read_image(dir.path / "wd" / "warped.ppm").shape() == Shape4{1, 3, 32, 32});
    CHECK(read_image(dir.path / "wd" / "heatmap.pgm").shape() == Shape4{1, 1, 32, 32});
}

TEST_CASE("flow-refine: a zero checkpoint zeroes the field") {
    TempDir dir("cli_refine");
    DetectorParams zp{BackboneConfig{4, 8, 8, 2}};
    for (ParamView& v : state_views(zp))
        for (std::size_t i = 0; i < v.size; ++i) v.data[i] = 0.0;
    save_checkpoint((dir.path / "zck").string(), zp);

    write_ppm(dir.path / "a.ppm", random_tensor({1, 3, 24, 24}, 5200, 0.0, 1.0));
    write_ppm(dir.path / "b.ppm", random_tensor({1, 3, 24, 24}, 5201, 0.0, 1.0));
    FlowField in(1, 24, 24);
    for (std::size_t i = 0; i < in.t.size(); ++i) in.t.data()[i] = i % 2 ? 1.5 : -0.25;
    write_flo((dir.path / "in.flo").string(), in);

    REQUIRE(run_cli("flow-refine --flo " + (dir.path / "in.flo").string() + " --frame-a " +
                    (dir.path / "a.ppm").string() + " --frame-b " + (dir.path / "b.ppm").string() +
                    " --ckpt " + (dir.path / "zck").string() + " --out " +
                    (dir.path / "out.flo").string()) == 0);

    const FlowField out = read_flo((dir.path / "out.flo").string());
    CHECK(out.h() == 24);
    CHECK(out.w() == 24);
    for (std::size_t i = 0; i < out.t.size(); ++i) CHECK(out.t.data()[i] == 0.0);
}

TEST_SUITE_END();
