#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

std::string work_dir() {
  static const std::string dir = [] {
    const std::string d = (fs::temp_directory_path() / "fdz_cli_tests").string();
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run(const std::string& args) {
  static int counter = 0;
  const std::string out_file = work_dir() + "/out" + std::to_string(counter++) + ".txt";
  const std::string cmd = std::string(FDZ_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(out_file);
  r.output = {std::istreambuf_iterator<char>(f), {}};
  return r;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Shared toy dataset + trained checkpoint, built once.
struct Fixture {
  std::string data_dir = work_dir() + "/data";
  std::string run_dir = work_dir() + "/run";

  Fixture() {
    RunResult synth = run("synth --gen-scenes 2 --size 64x64 --clean " + work_dir() +
                          "/scenes/clean --depth " + work_dir() + "/scenes/depth --out " +
                          data_dir + " --train-frac 0.5 --val-frac 0.5 --seed 3");
    REQUIRE(synth.exit_code == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("help exits 0 for the app and every subcommand") {
  CHECK(run("--help").exit_code == 0);
  for (const char* sub :
       {"synth", "train", "dehaze", "eval", "bench", "params", "gradcheck"}) {
    const RunResult r = run(std::string(sub) + " --help");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("--help") != std::string::npos);
  }
}

TEST_CASE("unknown flags and missing subcommands are usage errors") {
  CHECK(run("params --definitely-not-a-flag").exit_code == 2);
  CHECK(run("").exit_code == 2);
  CHECK(run("notacommand").exit_code == 2);
}

TEST_CASE("synth: bad input directory exits 2 and names the path") {
  const RunResult r = run("synth --clean " + work_dir() + "/nope --depth " + work_dir() +
                          "/nope2 --out " + work_dir() + "/never");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("/nope") != std::string::npos);
}

TEST_CASE("synth: default variations is 4 and count is printed") {
  fixture();
  const RunResult r = run("synth --clean " + work_dir() + "/scenes/clean --depth " + work_dir() +
                          "/scenes/depth --out " + work_dir() + "/data_default --seed 3");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("wrote 8 records") != std::string::npos);  // 2 scenes x 4
}

TEST_CASE("synth twice with the same seed is byte-identical") {
  fixture();
  const std::string out_a = work_dir() + "/det_a";
  const std::string out_b = work_dir() + "/det_b";
  const std::string common = " --clean " + work_dir() + "/scenes/clean --depth " + work_dir() +
                             "/scenes/depth --seed 11";
  REQUIRE(run("synth" + common + " --out " + out_a).exit_code == 0);
  REQUIRE(run("synth" + common + " --out " + out_b).exit_code == 0);
  CHECK(slurp(out_a + "/manifest.tsv") == slurp(out_b + "/manifest.tsv"));
  CHECK(slurp(out_a + "/hazy/scene000_v0.png") == slurp(out_b + "/hazy/scene000_v0.png"));
}

TEST_CASE("eval --identity row matches the documented schema exactly") {
  Fixture& f = fixture();
  const RunResult r = run("eval --identity --manifest " + f.data_dir + "/manifest.tsv --split all");
  CHECK(r.exit_code == 0);
  // model=<name> TAB psnr_db=<%.2f|inf> TAB ssim=<%.4f> TAB params=<count|->
  const std::regex row(R"(model=input\tpsnr_db=(\d+\.\d{2}|inf)\tssim=-?\d\.\d{4}\tparams=-\n)");
  CHECK(std::regex_match(r.output, row));
}

TEST_CASE("train, dehaze, eval: overfit improves the dehazed image") {
  Fixture& f = fixture();
  const RunResult t = run("train --manifest " + f.data_dir +
                          "/manifest.tsv --model fastnet --base-width 8 --blocks 2,2,2,2"
                          " --epochs 120 --patience 120 --out " +
                          f.run_dir + " --seed 2");
  REQUIRE(t.exit_code == 0);
  CHECK(t.output.find("checkpoints in") != std::string::npos);
  REQUIRE(fs::exists(f.run_dir + "/final.fdhz"));
  REQUIRE(fs::exists(f.run_dir + "/history.txt"));

  // Baseline: hazy inputs against truth.
  const RunResult base =
      run("eval --identity --manifest " + f.data_dir + "/manifest.tsv --split train");
  REQUIRE(base.exit_code == 0);
  // Model outputs against truth on the overfit (train) split.
  const RunResult model = run("eval --checkpoint " + f.run_dir + "/final.fdhz --manifest " +
                              f.data_dir + "/manifest.tsv --split train");
  REQUIRE(model.exit_code == 0);

  auto psnr_of = [](const std::string& row) {
    const std::regex re(R"(psnr_db=(\d+\.\d+))");
    std::smatch m;
    REQUIRE(std::regex_search(row, m, re));
    return std::stod(m[1]);
  };
  CHECK(psnr_of(model.output) > psnr_of(base.output));

  // dehaze writes side-by-side outputs for arbitrary-size inputs.
  const RunResult d = run("dehaze --checkpoint " + f.run_dir + "/final.fdhz --out " + work_dir() +
                          "/dehazed " + f.data_dir + "/hazy/scene000_v0.png");
  CHECK(d.exit_code == 0);
  CHECK(fs::exists(work_dir() + "/dehazed/scene000_v0_dehazed.png"));
}

TEST_CASE("eval without checkpoint or identity is a usage error") {
  Fixture& f = fixture();
  CHECK(run("eval --manifest " + f.data_dir + "/manifest.tsv").exit_code == 2);
}

TEST_CASE("train --init-checkpoint imports weights instead of random init") {
  Fixture& f = fixture();
  const std::string warm_dir = work_dir() + "/warm";
  const std::string common = "train --manifest " + f.data_dir +
                             "/manifest.tsv --model fastnet --base-width 8 --blocks 1,1,1,1"
                             " --epochs 1 --seed 2 --out ";
  REQUIRE(run(common + warm_dir).exit_code == 0);
  const RunResult r = run(common + work_dir() + "/resumed --init-checkpoint " + warm_dir +
                          "/final.fdhz");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("imported weights") != std::string::npos);

  // A mismatched architecture is rejected.
  const RunResult bad = run("train --manifest " + f.data_dir +
                            "/manifest.tsv --model fastnet --base-width 16 --blocks 1,1,1,1"
                            " --epochs 1 --out " +
                            work_dir() + "/mismatch --init-checkpoint " + warm_dir +
                            "/final.fdhz");
  CHECK(bad.exit_code != 0);
}

TEST_CASE("params --scale prints totals and table deltas") {
  const RunResult r = run("params --scale small");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("total") != std::string::npos);
  CHECK(r.output.find("11554167") != std::string::npos);
  CHECK(r.output.find("delta") != std::string::npos);
  CHECK(r.output.find("35609") != std::string::npos);

  const RunResult dual = run("params --scale dual");
  CHECK(dual.exit_code == 0);
  CHECK(dual.output.find("23072725") != std::string::npos);
}

TEST_CASE("gradcheck passes on the default toy model") {
  const RunResult r = run("gradcheck --per-tensor 2 --seed 4");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);
}

TEST_CASE("bench prints the sweep table and honors --report") {
  const std::string report = work_dir() + "/bench.txt";
  const RunResult r = run(
      "bench --model fastnet --base-width 8 --blocks 1,1,1,1 --resolutions 64x64 --batches 1"
      " --runs 2 --warmup 1 --report " +
      report);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("fps") != std::string::npos);
  REQUIRE(fs::exists(report));
  std::ifstream f(report);
  const std::string records{std::istreambuf_iterator<char>(f), {}};
  CHECK(records.find("size=64x64") != std::string::npos);
  CHECK(records.find("runs=2") != std::string::npos);
}

TEST_CASE("config file supplies defaults and flags win") {
  const std::string cfg = work_dir() + "/model.cfg";
  {
    std::ofstream f(cfg);
    f << "# toy model configuration\n"
         "model = fastnet\n"
         "base_width = 16\n"
         "blocks = 1,1,1,1\n";
  }
  const RunResult from_config = run("params --config " + cfg);
  CHECK(from_config.exit_code == 0);

  const RunResult flag_wins = run("params --config " + cfg + " --base-width 8");
  CHECK(flag_wins.exit_code == 0);
  CHECK(flag_wins.output != from_config.output);

  // Environment variable supplies the default config path.
  const std::string via_env = "FASTDEHAZE_CONFIG=" + cfg + " " + std::string(FDZ_CLI_PATH) +
                              " params > " + work_dir() + "/env_out.txt 2>&1";
  CHECK(WEXITSTATUS(std::system(via_env.c_str())) == 0);
  std::ifstream f(work_dir() + "/env_out.txt");
  const std::string env_out{std::istreambuf_iterator<char>(f), {}};
  CHECK(env_out == from_config.output);
}

TEST_CASE("unknown config keys are rejected") {
  const std::string cfg = work_dir() + "/bad.cfg";
  {
    std::ofstream f(cfg);
    f << "base_width = 8\nnot_a_real_key = 1\n";
  }
  const RunResult r = run("params --config " + cfg);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("not_a_real_key") != std::string::npos);
}
