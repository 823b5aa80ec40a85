#include "doctest.h"

#include "tdnoise/cloud.hpp"
#include "tdnoise/eval.hpp"
#include "tdnoise/meshio.hpp"
#include "tdnoise/net.hpp"
#include "tdnoise/shapes.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tdn;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Sandbox {
 public:
  Sandbox() {
    dir_ = fs::temp_directory_path() / ("tdnoise_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

  Run run(const std::string& args) const {
    const fs::path o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" TDNOISE_BIN "' " + args + " >'" + o.string() +
                            "' 2>'" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }

 private:
  fs::path dir_;
  static inline int counter_ = 0;
};

// Cube mesh, clean samples and a noisy copy laid out as a training directory.
void make_dataset(const Sandbox& s) {
  write_mesh_off(shapes::cube(), s / "cube.off");
  REQUIRE(s.run("sample cube.off --count 1500 --seed 2 -o data/cube_clean.ply").code == 0);
  fs::copy_file(s / "cube.off", s / "data/cube_mesh.off");
  REQUIRE(s.run("corrupt data/cube_clean.ply --level 0.01 --seed 4 -o data/cube.ply").code == 0);
  fs::remove(s / "data/tdnoise-sample.cfg");
  fs::remove(s / "data/tdnoise-corrupt.cfg");
}

double coordinate_std(const PointCloud& a, const PointCloud& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.positions[i] - b.positions[i]).squaredNorm();
  return std::sqrt(s / (3.0 * static_cast<double>(a.size())));
}

}  // namespace

TEST_CASE("help and usage errors") {
  Sandbox s;
  CHECK(s.run("--help").code == 0);
  CHECK(s.run("").code == 2);
  CHECK(s.run("frobnicate").code == 2);
  CHECK(s.run("sample").code == 2);
  CHECK(s.run("--threads 0 toy -e anneal -o t").code == 2);
}

TEST_CASE("sample: count, colors, determinism, echoed config") {
  Sandbox s;
  write_mesh_off(shapes::cube(), s / "cube.off");
  REQUIRE(s.run("sample cube.off --count 5000 --shade --seed 7 -o clean.ply").code == 0);
  const PointCloud c = read_pointcloud(s / "clean.ply");
  CHECK(c.size() > 4500);
  CHECK(c.size() < 5500);
  CHECK(c.has_colors());
  REQUIRE(s.run("sample cube.off --count 5000 --shade --seed 7 -o again.ply").code == 0);
  CHECK(slurp(s / "clean.ply") == slurp(s / "again.ply"));
  const std::string cfg = slurp(s / "tdnoise-sample.cfg");
  CHECK(cfg.find("sample.count = 5000") != std::string::npos);
  CHECK(cfg.find("seed = 7") != std::string::npos);
}

TEST_CASE("missing input names the path and exits 2") {
  Sandbox s;
  const Run r = s.run("sample no_such_mesh.off --count 10 -o x.ply");
  CHECK(r.code == 2);
  CHECK(r.err.find("no_such_mesh.off") != std::string::npos);
}

TEST_CASE("config files: unknown keys fail, flags override the file") {
  Sandbox s;
  write_mesh_off(shapes::cube(), s / "cube.off");
  std::ofstream(s / "bad.cfg") << "sample.cuont = 10\n";
  const Run bad = s.run("sample cube.off -c bad.cfg -o x.ply");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("sample.cuont") != std::string::npos);
  std::ofstream(s / "ok.cfg") << "sample.count = 100\nseed = 3\n";
  REQUIRE(s.run("sample cube.off -c ok.cfg --count 300 -o y.ply").code == 0);
  const std::string cfg = slurp(s / "tdnoise-sample.cfg");
  CHECK(cfg.find("sample.count = 300") != std::string::npos);
  CHECK(cfg.find("seed = 3") != std::string::npos);
  CHECK(s.run("sample cube.off --set nope=1 -o z.ply").code == 2);
}

TEST_CASE("corrupt: levels and scanner geometry") {
  Sandbox s;
  write_mesh_off(shapes::sphere(1.0, 3), s / "sphere.off");
  REQUIRE(s.run("sample sphere.off --count 4000 --seed 1 -o clean.ply").code == 0);
  const PointCloud clean = read_pointcloud(s / "clean.ply");
  const double diag = bbox_diagonal(clean);

  REQUIRE(s.run("corrupt clean.ply --noise gaussian --level 0 -o zero.ply").code == 0);
  CHECK(read_pointcloud(s / "zero.ply").positions == clean.positions);

  REQUIRE(s.run("corrupt clean.ply --noise gaussian --level 0.01 --seed 5 -o g.ply").code == 0);
  CHECK(coordinate_std(read_pointcloud(s / "g.ply"), clean) == doctest::Approx(0.01 * diag).epsilon(0.05));

  REQUIRE(s.run("corrupt clean.ply --noise scanner --level 0.005 --bias 0.005 --seed 5 -o sc.ply").code == 0);
  const PointCloud sc = read_pointcloud(s / "sc.ply");
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const Vec3 d = sc.positions[i] - clean.positions[i];
    CHECK(d.cross(clean.positions[i].normalized()).norm() < 1e-9);
  }
  CHECK(slurp(s / "sc.ply").find("scanner") != std::string::npos);

  CHECK(s.run("corrupt clean.ply --level -0.5 -o bad.ply").code == 2);
  CHECK(s.run("corrupt clean.ply --noise pink -o bad.ply").code == 2);
}

TEST_CASE("train: error drops, resume matches, denoise and baseline run") {
  Sandbox s;
  make_dataset(s);
  const Run tr = s.run("--threads 1 train data --epochs 20 --seed 1 -o run");
  REQUIRE(tr.code == 0);
  double initial = 0.0, final_error = 0.0;
  {
    std::istringstream in(tr.out);
    std::string tok;
    while (in >> tok) {
      if (tok == "initial_error") in >> initial;
      if (tok == "final_error") in >> final_error;
    }
  }
  REQUIRE(initial > 0.0);
  CHECK(final_error < initial);
  CHECK(fs::exists(s / "run/report.csv"));
  CHECK(fs::exists(s / "run/tdnoise-train.cfg"));

  // interruption after epoch 2 and resume
  REQUIRE(s.run("train data --epochs 4 --seed 1 -o full").code == 0);
  REQUIRE(s.run("train data --epochs 4 --seed 1 --stop-after 2 -o part").code == 0);
  REQUIRE(s.run("train data --epochs 4 --seed 1 --resume part/checkpoint.tdn -o rest").code == 0);
  auto row = [](const std::string& csv, int epoch) {
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind(std::to_string(epoch) + ",", 0) == 0) return line.substr(0, line.find(',', line.find(',') + 1));
    return std::string();
  };
  const std::string a = row(slurp(s / "full/report.csv"), 3), b = row(slurp(s / "rest/report.csv"), 3);
  CHECK_FALSE(a.empty());
  CHECK(a == b);
  CHECK(read_checkpoint(s / "full/checkpoint.tdn").params.values() ==
        read_checkpoint(s / "rest/checkpoint.tdn").params.values());

  // thread count does not change the result
  REQUIRE(s.run("--threads 3 train data --epochs 4 --seed 1 -o full3").code == 0);
  CHECK(slurp(s / "full/checkpoint.tdn") == slurp(s / "full3/checkpoint.tdn"));

  const Run dn = s.run("denoise run/checkpoint.tdn data/cube.ply --iterations 2 -o den.ply");
  REQUIRE(dn.code == 0);
  CHECK(dn.out.find("iteration 2 mean_displacement") != std::string::npos);
  CHECK(read_pointcloud(s / "den.ply").size() == read_pointcloud(s / "data/cube.ply").size());

  const Run mismatch = s.run("denoise run/checkpoint.tdn data/cube.ply --set arch.width1=16 -o d2.ply");
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("width=16") != std::string::npos);
  CHECK(mismatch.err.find("width=32") != std::string::npos);

  const Run bl = s.run("baseline data/cube.ply --filter mean --set filter.radius=0.05 -o mean.ply");
  REQUIRE(bl.code == 0);
  const TriangleMesh cube = read_mesh(s / "cube.off");
  const PointCloud clean = read_pointcloud(s / "data/cube_clean.ply");
  const double noisy_d = chamfer(read_pointcloud(s / "data/cube.ply"), cube, clean).chamfer;
  CHECK(chamfer(read_pointcloud(s / "mean.ply"), cube, clean).chamfer < noisy_d);

  const Run tune = s.run("baseline --tune data --filter bilateral");
  REQUIRE(tune.code == 0);
  CHECK(tune.out.find("filter.radius = ") != std::string::npos);

  fs::create_directories(s / "lonely");
  fs::copy_file(s / "data/cube.ply", s / "lonely/cube.ply");
  CHECK(s.run("train lonely --mode supervised -o sup").code == 2);
  CHECK(s.run("baseline --tune lonely").code == 2);
}

TEST_CASE("denoise with the identity checkpoint returns the input") {
  Sandbox s;
  write_mesh_off(shapes::cube(), s / "cube.off");
  REQUIRE(s.run("sample cube.off --count 800 --seed 1 -o c.xyz").code == 0);
  write_checkpoint(s / "id.tdn", Checkpoint{ModelParams::init(ArchSpec{}, 3), std::nullopt, {}});
  REQUIRE(s.run("denoise id.tdn c.xyz -o out.xyz").code == 0);
  CHECK(read_pointcloud(s / "out.xyz").positions == read_pointcloud(s / "c.xyz").positions);
}

TEST_CASE("eval writes a zero report for clean against itself") {
  Sandbox s;
  write_mesh_off(shapes::cube(), s / "cube.off");
  REQUIRE(s.run("sample cube.off --count 800 --seed 1 -o c.ply").code == 0);
  const Run r = s.run("eval c.ply cube.off c.ply -o report");
  REQUIRE(r.code == 0);
  for (const char* f : {"report.json", "distances.csv", "histogram.csv", "error.ply", "tdnoise-eval.cfg"})
    CHECK(fs::exists(s / (std::string("report/") + f)));
  std::istringstream in(r.out);
  std::string tok;
  double d = 1.0;
  in >> tok >> d;
  CHECK(tok == "chamfer");
  CHECK(d < 1e-12);
  CHECK(s.run("eval c.ply missing.off c.ply -o report").code == 2);
}

TEST_CASE("toy anneal and modes write their curves") {
  Sandbox s;
  const Run an = s.run("toy -e anneal -o a");
  REQUIRE(an.code == 0);
  CHECK(fs::exists(s / "a/anneal_gamma2.csv"));
  CHECK(fs::exists(s / "a/anneal_summary.csv"));
  const Run md = s.run("toy -e modes --sigma 0.3 --count 5000 -o m");
  REQUIRE(md.code == 0);
  CHECK(fs::exists(s / "m/modes_summary.csv"));
  CHECK(fs::exists(s / "m/modes_sigma_0.3.xyz"));
  CHECK(s.run("toy -e nothing -o m").code == 2);
}
