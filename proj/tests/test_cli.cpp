#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "endo/config.hpp"
#include "endo/dataset.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Sandbox {
 public:
  Sandbox() : dir_(fs::temp_directory_path() / ("endo_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }
  const fs::path& dir() const { return dir_; }
  fs::path operator/(const std::string& s) const { return dir_ / s; }

  Run run(const std::string& args) const {
    const fs::path o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" ENDO_CLI_PATH "' " + args + " > '" + o.string() +
                            "' 2> '" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

 private:
  fs::path dir_;
};

std::string last_line(const std::string& s) {
  std::string t = s;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  return t.substr(t.rfind('\n') == std::string::npos ? 0 : t.rfind('\n') + 1);
}

// A pipeline small enough to run in seconds.
constexpr char kTinyConfig[] =
    "width=32\nheight=32\nn_synth=12\nn_real=12\nheldout_pairs=3\np_target=60\n"
    "epochs=1\nlearning_rate=3e-5\n"
    "t_channels=4\nt_blocks=1\nbatch=2\nbuffer_capacity=4\npretrain_t=1\npretrain_d=1\nsteps=2\n"
    "d_conv1=4\nd_conv2=4\nd_conv3=4\nd_conv4=4\n";

}  // namespace

TEST_CASE("gen-synth writes a deterministic manifest and echoes its config") {
  Sandbox box;
  auto a = box.run("gen-synth --n 10 --seed 7 --out a");
  auto b = box.run("gen-synth --n 10 --seed 7 --out b");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const auto m = endo::read_manifest(box / "a/manifest.tsv");
  CHECK(m.size() == 10);
  CHECK(slurp(box / "a/manifest.tsv") == slurp(box / "b/manifest.tsv"));
  for (const auto& e : m.entries) {
    CHECK(slurp(m.image_path(e)) == slurp(box / "b" / e.image));
    CHECK(slurp(m.depth_path(e)) == slurp(box / "b" / e.depth));
  }
  // The echo alone reproduces the run.
  CHECK(endo::load_config(box / "a/config.txt").seed == 7);
  auto c = box.run("gen-synth --n 10 --config a/config.txt --out c");
  REQUIRE(c.code == 0);
  CHECK(slurp(box / "a/manifest.tsv") == slurp(box / "c/manifest.tsv"));

  auto d = box.run("gen-synth --n 10 --seed 8 --out d");
  REQUIRE(d.code == 0);
  CHECK(slurp(box / "a/img_00000.pgm") != slurp(box / "d/img_00000.pgm"));
}

TEST_CASE("eval of identical manifests gives 0,0,1") {
  Sandbox box;
  REQUIRE(box.run("gen-synth --n 4 --out d").code == 0);
  auto r = box.run("eval --pred d/manifest.tsv --truth d/manifest.tsv");
  REQUIRE(r.code == 0);
  CHECK(last_line(r.out) == "mean,0,0,1");
  r = box.run("eval --pred d --truth d --tag same --out e");
  REQUIRE(r.code == 0);
  CHECK(last_line(slurp(box / "e/same.csv")) == "mean,0,0,1");
  CHECK(fs::exists(box / "e/config.txt"));
}

TEST_CASE("usage errors exit 2, runtime errors exit 1, one error line each") {
  Sandbox box;
  auto check_error = [](const Run& r, int code, const std::string& kind) {
    CHECK(r.code == code);
    const std::string line = last_line(r.err);
    CHECK(line.rfind("error kind=" + kind, 0) == 0);
  };
  check_error(box.run(""), 2, "usage");
  check_error(box.run("frobnicate"), 2, "usage");
  check_error(box.run("gen-synth --n 3"), 2, "usage");  // no --out
  check_error(box.run("gen-synth --n zero --out x"), 2, "usage");
  check_error(box.run("gen-synth --n 3 --bogus --out x"), 2, "usage");
  check_error(box.run("predict --model missing.ckpt --input x --out y"), 2, "usage");
  check_error(box.run("transform --model missing.ckpt --input x --out y --split nope"), 2, "usage");

  box.write("bad.cfg", "momentum=1.5\n");
  auto r = box.run("gen-synth --n 3 --config bad.cfg --out x");
  check_error(r, 2, "config");
  CHECK(last_line(r.err).find("key=momentum") != std::string::npos);
  box.write("unknown.cfg", "colour=red\n");
  r = box.run("gen-synth --n 3 --config unknown.cfg --out x");
  check_error(r, 2, "config");
  CHECK(last_line(r.err).find("key=colour") != std::string::npos);
  r = box.run("gen-synth --n 3 --set lambda=-2 --out x");
  check_error(r, 2, "config");
  CHECK(last_line(r.err).find("key=lambda") != std::string::npos);
  CHECK_FALSE(fs::exists(box / "x"));

  check_error(box.run("train-depth --data nowhere --out y"), 1, "runtime");
  check_error(box.run("eval --pred nowhere --truth nowhere"), 1, "runtime");

  CHECK(box.run("--help").code == 0);
  CHECK(box.run("gen-synth --help").code == 0);
}

TEST_CASE("stages chain through their output directories") {
  Sandbox box;
  box.write("tiny.cfg", kTinyConfig);
  REQUIRE(box.run("gen-synth --config tiny.cfg --out syn").code == 0);
  REQUIRE(box.run("gen-pseudoreal --config tiny.cfg --seed 8 --out real").code == 0);
  CHECK(fs::exists(box / "real/clean.tsv"));

  auto r = box.run("train-depth --config tiny.cfg --data syn --out depth");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(box / "depth/crf.ckpt"));
  CHECK(fs::exists(box / "depth/depth_log.csv"));

  r = box.run("train-da --config tiny.cfg --synthetic syn --real real --out da");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(box / "da/da_log.csv").rfind("step,loss_T,loss_T_adv,loss_T_selfreg,loss_D,disc_patch_acc\n", 0) == 0);

  r = box.run("transform --config tiny.cfg --model da/transformer.ckpt --input real --split heldout --out tr");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto tr = endo::read_manifest(box / "tr/manifest.tsv");
  CHECK(tr.size() == 12 - endo::split_counts(12)[0]);

  r = box.run("predict --config tiny.cfg --model depth/crf.ckpt --input tr --pgm --out pred");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto pred = endo::read_manifest(box / "pred/manifest.tsv");
  CHECK(pred.size() == tr.size());
  CHECK(fs::exists(box / ("pred/pred_" + std::string(5 - std::to_string(tr.entries[0].index).size(), '0') +
                          std::to_string(tr.entries[0].index) + ".pgm")));

  r = box.run("eval --config tiny.cfg --pred pred --truth real --split heldout");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(last_line(r.out).rfind("mean,", 0) == 0);

  for (const char* d : {"syn", "real", "depth", "da", "tr", "pred"}) CHECK(fs::exists(box / d / "config.txt"));

  // Transforming with a checkpoint built for another size fails cleanly.
  REQUIRE(box.run("gen-synth --n 2 --out big").code == 0);
  CHECK(box.run("transform --model da/transformer.ckpt --input big --out tr2").code == 1);
}

TEST_CASE("repro is repeatable and writes its summary") {
  Sandbox box;
  box.write("tiny.cfg", kTinyConfig);
  auto a = box.run("repro --config tiny.cfg --out ra");
  REQUIRE_MESSAGE(a.code == 0, a.err);
  auto b = box.run("repro --config tiny.cfg --out rb");
  REQUIRE_MESSAGE(b.code == 0, b.err);
  CHECK(a.out == b.out);
  CHECK(a.out.find("ssim ratio") != std::string::npos);
  for (const char* f : {"metrics.txt", "summary.txt", "da/da_log.csv", "depth/depth_log.csv", "raw.csv",
                        "transformed.csv", "depth/crf.ckpt", "da/transformer.ckpt"}) {
    CHECK_MESSAGE(slurp(box / "ra" / f) == slurp(box / "rb" / f), f);
  }
  CHECK(slurp(box / "ra/metrics.txt").find("texture_pairs=3\n") != std::string::npos);

  // Without --out the run lands in ./repro_out.
  REQUIRE(box.run("repro --config tiny.cfg").code == 0);
  CHECK(slurp(box / "repro_out/metrics.txt") == slurp(box / "ra/metrics.txt"));
}
