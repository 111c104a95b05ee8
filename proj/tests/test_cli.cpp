// Copyright 2026 The simtrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "simtrack/io.hpp"
#include "simtrack/profile.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace simtrack;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class Workdir {
 public:
  Workdir() : dir_(fs::temp_directory_path() / ("simtrack_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(dir_);
  }
  ~Workdir() { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Result run(const std::string& args) const {
    const std::string err = path("stderr.txt");
    const std::string cmd = std::string(SIMTRACK_CLI) + " " + args + " 2>" + err;
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = io::read_file(err);
    return r;
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

 private:
  fs::path dir_;
};

}  // namespace

TEST_CASE("synth then track then eval on a clean scenario") {
  Workdir w;
  w.write("world.json", R"({"world": {"identities": 3, "frames": 10, "dim": 16}})");
  const std::string cfg = "--config " + w.path("world.json");
  REQUIRE(w.run(cfg + " synth -o " + w.path("det.txt") + " --gt " + w.path("gt.txt")).code == 0);

  const Result t = w.run("track -i " + w.path("det.txt") + " -o " + w.path("pred.txt"));
  REQUIRE(t.code == 0);
  CHECK(t.err.find("tracked 3 tracks from 30 detections") != std::string::npos);
  std::istringstream pred(io::read_file(w.path("pred.txt")));
  const auto rows = io::read_mot(pred);
  CHECK(rows.size() == 30);
  std::set<int> ids;
  for (const auto& r : rows) ids.insert(r.id);
  CHECK(ids.size() == 3);

  const Result e = w.run("eval --gt " + w.path("gt.txt") + " --pred " + w.path("pred.txt"));
  REQUIRE(e.code == 0);
  CHECK(e.out.find("all.MOTA=1.000000") != std::string::npos);
  CHECK(e.out.find("all.IDF1=1.000000") != std::string::npos);
  CHECK(e.out.find("all.IDSW=0") != std::string::npos);
}

TEST_CASE("track output equals the library step loop") {
  Workdir w;
  w.write("world.json",
          R"({"world": {"identities": 6, "frames": 40, "fp_rate": 0.1, "fn_rate": 0.1, "embed_noise": 0.5,
                        "box_jitter": 2.0, "distractors": 2}})");
  REQUIRE(w.run("--seed 5 --config " + w.path("world.json") + " synth -o " + w.path("det.txt")).code == 0);
  for (const char* profile : {"bdd100k", "mot17", "tao"}) {
    CAPTURE(profile);
    const Result t = w.run(std::string("--profile ") + profile + " track -i " + w.path("det.txt"));
    REQUIRE(t.code == 0);

    std::istringstream in(io::read_file(w.path("det.txt")));
    const auto file = io::read_detections(in);
    Tracker tracker(load_profile(profile));
    for (const auto& [frame, dets] : io::group_by_frame(file)) tracker.step(frame, dets);
    std::ostringstream expected;
    io::write_mot(expected, io::to_mot(finalize(tracker)));
    CHECK(t.out == expected.str());
  }
}

TEST_CASE("track edge cases and errors") {
  Workdir w;
  w.write("empty.txt", "");
  const Result e = w.run("track -i " + w.path("empty.txt"));
  CHECK(e.code == 0);
  CHECK(e.out.empty());

  const Result p = w.run("--profile kitti track -i " + w.path("empty.txt"));
  CHECK(p.code != 0);
  CHECK(p.err.find("unknown profile") != std::string::npos);
  CHECK(p.err.find("Usage") != std::string::npos);

  w.write("bad.txt", "# simtrack-detections v1 dim=2\n0,0,0.9,0,0,10,10,1,0\n0,0,0.9,0,0,10,10,1\n");
  const Result b = w.run("track -i " + w.path("bad.txt"));
  CHECK(b.code == 2);
  CHECK(b.err.find("line 3") != std::string::npos);

  CHECK(w.run("track -i " + w.path("missing.txt")).code == 2);
  CHECK(w.run("track").code == 1);
  CHECK(w.run("").code == 1);
  w.write("cfg.json", R"({"trackr": {}})");
  CHECK(w.run("--config " + w.path("cfg.json") + " track -i " + w.path("empty.txt")).code == 1);
}

TEST_CASE("track reads standard input") {
  Workdir w;
  w.write("one.txt", "# simtrack-detections v1 dim=2\n0,0,0.9,0,0,10,10,1,0\n");
  const Result r = w.run("track -i - < " + w.path("one.txt"));
  CHECK(r.code == 0);
  CHECK(r.out == "0,1,0,0,10,10,0.9,0,1\n");
}

TEST_CASE("eval warns on disjoint frame ranges and honors flags") {
  Workdir w;
  w.write("gt.txt", "1,1,0,0,10,10,1,0,1\n2,1,0,0,10,10,1,0,1\n");
  w.write("pred.txt", "5,1,0,0,10,10,1,0,1\n");
  const Result r = w.run("eval --gt " + w.path("gt.txt") + " --pred " + w.path("pred.txt"));
  CHECK(r.code == 0);
  CHECK(r.err.find("disjoint") != std::string::npos);
  CHECK(r.out.find("all.FN=2") != std::string::npos);
  CHECK(r.out.find("all.FP=1") != std::string::npos);

  w.write("pred2.txt", "1,1,0,0,10,10,1,0,1\n2,1,0,0,10,10,1,0,1\n3,1,50,50,10,10,1,4,1\n");
  const Result c = w.run("eval --per-class --gt " + w.path("gt.txt") + " --pred " + w.path("pred2.txt") +
                         " -o " + w.path("kv.txt"));
  CHECK(c.code == 0);
  const std::string kv = io::read_file(w.path("kv.txt"));
  CHECK(kv.find("class.4.FP=1") != std::string::npos);
  CHECK(kv.find("mMOTA=1.000000") != std::string::npos);

  w.write("empty.txt", "");
  CHECK(w.run("eval --gt " + w.path("empty.txt") + " --pred " + w.path("pred.txt")).code == 2);
  CHECK(w.run("eval --gt " + w.path("gt.txt") + " --pred " + w.path("pred.txt") + " --iou 1.5").code == 1);
}

TEST_CASE("commands are reproducible under a seed") {
  Workdir w;
  w.write("world.json", R"({"world": {"identities": 5, "frames": 30, "fp_rate": 0.2, "embed_noise": 0.8}})");
  const std::string cfg = "--config " + w.path("world.json");
  const Result a = w.run("--seed 9 " + cfg + " synth");
  const Result b = w.run("--seed 9 " + cfg + " synth");
  const Result c = w.run("--seed 10 " + cfg + " synth");
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);

  w.write("det.txt", a.out);
  CHECK(w.run("--seed 9 track -i " + w.path("det.txt")).out == w.run("--seed 9 track -i " + w.path("det.txt")).out);

  w.write("sweep.json", R"({"metric": ["cosine", "bisoftmax"], "loss": ["eq4"], "seeds": [1, 2]})");
  const Result x = w.run(cfg + " ablate --train-steps 10 --sweep " + w.path("sweep.json"));
  const Result y = w.run(cfg + " ablate --train-steps 10 --sweep " + w.path("sweep.json"));
  REQUIRE(x.code == 0);
  CHECK(x.out == y.out);
  CHECK(x.out.rfind("metric,loss,seed,MOTA,IDF1,HOTA,IDSW\n", 0) == 0);
}

TEST_CASE("ablate rejects unknown sweep keys before running") {
  Workdir w;
  w.write("sweep.json", R"({"metric": ["cosine"], "speed": [1, 2]})");
  const Result r = w.run("ablate --sweep " + w.path("sweep.json"));
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown sweep key 'speed'") != std::string::npos);
  CHECK(r.out.find("seed,MOTA") == std::string::npos);
}

TEST_CASE("gradcheck command") {
  Workdir w;
  const Result ok = w.run("gradcheck --dims 4 --key-size 8 --ref-size 8 --seeds 10");
  CHECK(ok.code == 0);
  CHECK(ok.out.rfind("gradcheck PASS", 0) == 0);
  const Result zero = w.run("gradcheck --embed-weight 0 --aux-weight 0");
  CHECK(zero.code == 0);
  CHECK(zero.out.find("max relative error 0.000e+00\n") != std::string::npos);
  const Result bad = w.run("gradcheck --corrupt");
  CHECK(bad.code == 3);
  CHECK(bad.out.rfind("gradcheck FAIL", 0) == 0);
}
