#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "pclv/error.hpp"
#include "pclv/pipeline.hpp"
#include "pclv/synthetic.hpp"

using namespace pclv;

namespace {

struct Frame {
  oracle::TempDir dir{"pipeline"};
  SyntheticFrame frame;
  Frame(std::size_t w = 64, std::size_t h = 48, std::uint64_t seed = 3) {
    RoomSceneParams p;
    p.width = w;
    p.height = h;
    p.seed = seed;
    frame = room_scene(p);
    write_frame(frame, dir.path());
  }
  RunConfig config() const {
    RunConfig cfg;
    cfg.set("depth", (dir / "depth.png").string());
    cfg.set("rgb", (dir / "rgb.png").string());
    cfg.set("intrinsics", (dir / "intrinsics.txt").string());
    return cfg;
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool has_field(const std::vector<Diagnostic>& d, const std::string& field) {
  for (const auto& x : d) {
    if (x.field == field) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("defaults plus an input and a target validate cleanly") {
  RunConfig cfg;
  CHECK(cfg.modalities == *ModalitySet::preset("pclv"));
  CHECK(cfg.mode == MergeMode::kMultiCriteria);
  CHECK(cfg.boundary_distance == 2.0);
  CHECK_FALSE(validate(cfg).empty());  // no input, no delta
  cfg.set("depth", "d.png");
  cfg.set("rgb", "c.png");
  cfg.set("target_segments", "500");
  CHECK(validate(cfg).empty());
}

TEST_CASE("validation diagnostics name the offending field") {
  RunConfig cfg;
  cfg.set("ply", "x.ply");
  cfg.set("delta", "0.5");
  CHECK(validate(cfg).empty());

  auto bad = cfg;
  bad.set("k", "0");
  CHECK(has_field(validate(bad), "k"));

  bad = cfg;
  bad.set("modalities", "lv_fpfh");
  bad.set("estimate_normals", "false");
  CHECK(has_field(validate(bad), "normals_file"));
  bad.set("normals_file", "n.bin");
  CHECK(validate(bad).empty());

  bad = cfg;
  bad.set("graph", "grid8");
  CHECK(has_field(validate(bad), "graph"));

  bad = cfg;
  bad.set("graph", "radius");
  CHECK(has_field(validate(bad), "radius"));
  bad.set("radius", "0.05");
  CHECK(validate(bad).empty());

  bad = cfg;
  bad.set("mode", "linear");
  bad.set("modalities", "color,fpfh");
  CHECK(has_field(validate(bad), "mode"));

  bad = cfg;
  bad.set("mode", "linear");
  bad.set("kc", "-1");
  CHECK(has_field(validate(bad), "kc"));

  bad = cfg;
  bad.set("sort_modality", "normal");
  bad.set("modalities", "lv");
  CHECK(has_field(validate(bad), "sort_modality"));

  bad = cfg;
  bad.target_segments = 10;
  CHECK(has_field(validate(bad), "delta"));

  bad = cfg;
  bad.set("gt", "gt.png");
  CHECK(has_field(validate(bad), "gt"));

  bad = cfg;
  bad.set("depth", "d.png");
  CHECK(has_field(validate(bad), "ply"));
}

TEST_CASE("config keys parse, reject bad values and round-trip through the map") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("colour", "1"), Error);
  CHECK_THROWS_AS(cfg.set("k", "eight"), Error);
  CHECK_THROWS_AS(cfg.set("k", "-3"), Error);
  CHECK_THROWS_AS(cfg.set("graph", "mesh"), Error);
  CHECK_THROWS_AS(cfg.set("preset", "rainbow"), Error);
  CHECK_THROWS_AS(cfg.set("postprocess", "maybe"), Error);

  cfg.set("delta", "0.25");
  cfg.set("target_segments", "100");
  CHECK_FALSE(cfg.delta.has_value());
  cfg.set("delta", "0.125");
  CHECK_FALSE(cfg.target_segments.has_value());

  cfg.set("ply", "a b.ply");
  cfg.set("graph", "knn");
  cfg.set("k", "12");
  cfg.set("modalities", "dn");
  cfg.set("mode", "linear");
  cfg.set("kc", "0.1");
  cfg.set("kd", "0.2");
  cfg.set("kn", "0.7");
  cfg.set("gt_ignore", "none");
  RunConfig back;
  for (const auto& [k, v] : cfg.to_map()) back.set(k, v);
  CHECK(back.to_map() == cfg.to_map());
  CHECK(back.delta == 0.125);
  CHECK(back.coefficients.normal == 0.7);
  CHECK_FALSE(back.gt_ignore.has_value());
  for (const auto& [k, v] : cfg.to_map()) {
    CHECK(std::find(RunConfig::keys().begin(), RunConfig::keys().end(), k) != RunConfig::keys().end());
  }
}

TEST_CASE("config files: comments, precedence and errors") {
  oracle::TempDir dir("cfg");
  std::ofstream(dir / "c.cfg") << "# comment\npreset = lv\n\nk=5\ngraph = knn\ndelta=0.3\n";
  RunConfig cfg;
  cfg.load_file(dir / "c.cfg");
  CHECK(cfg.modalities == ModalitySet{Modality::kColor});
  CHECK(cfg.k == 5);
  CHECK(cfg.delta == 0.3);
  // A later override (as a CLI flag would) wins over the file.
  cfg.set("k", "9");
  CHECK(cfg.k == 9);
  std::ofstream(dir / "bad.cfg") << "k 5\n";
  CHECK_THROWS_AS(cfg.load_file(dir / "bad.cfg"), Error);
  CHECK_THROWS_AS(cfg.load_file(dir / "missing.cfg"), Error);
}

TEST_CASE("presets, including the outdoor one") {
  RunConfig cfg;
  cfg.set("preset", "outdoor");
  CHECK(cfg.graph == GraphMethod::kKnn);
  CHECK(cfg.k == 8);
  CHECK(cfg.unsigned_normals == true);
  CHECK(cfg.modalities == *ModalitySet::preset("pclv"));
  for (const char* p : {"lv", "lv_d", "lv_n", "dn", "lv_fpfh", "pclv"}) {
    cfg.set("preset", p);
    CHECK(cfg.modalities == *ModalitySet::preset(p));
  }
}

TEST_CASE("default RGB-D run uses grid8 and the pclv modalities") {
  Frame f;
  auto cfg = f.config();
  cfg.set("target_segments", "40");
  cfg.set("gt", (f.dir / "gt.png").string());
  const auto res = run(cfg);
  CHECK(res.segmentation.graph == GraphMethod::kGrid8);
  CHECK(res.segmentation.config.modalities == *ModalitySet::preset("pclv"));
  CHECK(res.segmentation.config.mode == MergeMode::kMultiCriteria);
  CHECK(res.within_tolerance);
  CHECK(std::abs(static_cast<double>(res.segmentation.num_segments()) - 40.0) <= 2.0);
  REQUIRE(res.metrics.has_value());
  CHECK(res.metrics->boundary_recall >= 0.0);
  CHECK(res.metrics->boundary_recall <= 1.0);
  CHECK(res.stats.normals_estimated == 1);
  CHECK(res.stats.fpfh_computed == 0);
  std::vector<std::string> stages;
  for (const auto& t : res.stats.timings) stages.push_back(t.stage);
  const std::vector<std::string> expect = {"ingest", "graph", "descriptors", "weights", "merge",
                                           "postprocess", "eval", "output"};
  CHECK(stages == expect);
}

TEST_CASE("a color-only run never estimates descriptors") {
  Frame f;
  auto cfg = f.config();
  cfg.set("preset", "lv");
  cfg.set("delta", "0.5");
  const auto res = run(cfg);
  CHECK(res.stats.normals_estimated == 0);
  CHECK(res.stats.normals_loaded == 0);
  CHECK(res.stats.fpfh_computed == 0);
  CHECK_FALSE(res.cloud.normals.has_value());
  CHECK_FALSE(res.cloud.fpfh.has_value());
}

TEST_CASE("descriptor caches are written and then reused") {
  Frame f;
  auto cfg = f.config();
  cfg.set("modalities", "color,normal,fpfh");
  cfg.set("delta", "0.5");
  cfg.set("normals_file", (f.dir / "n.bin").string());
  cfg.set("fpfh_file", (f.dir / "f.bin").string());
  const auto first = run(cfg);
  CHECK(first.stats.normals_estimated == 1);
  CHECK(first.stats.fpfh_computed == 1);
  const auto second = run(cfg);
  CHECK(second.stats.normals_loaded == 1);
  CHECK(second.stats.fpfh_loaded == 1);
  CHECK(second.stats.normals_estimated == 0);
  CHECK(second.stats.fpfh_computed == 0);
  CHECK(second.segmentation.labels == first.segmentation.labels);

  cfg.set("normal_k", "12");
  cfg.set("estimate_normals", "false");
  try {
    run(cfg);
    FAIL("expected a stage error");
  } catch (const Error& e) {
    CHECK(e.stage() == "descriptors");
  }
}

TEST_CASE("metadata replays the run bit-identically") {
  Frame f;
  auto cfg = f.config();
  cfg.set("target_segments", "30");
  cfg.set("out_labels", (f.dir / "labels.txt").string());
  const auto res = run(cfg);
  const auto meta_path = f.dir / "labels.txt.meta.json";
  REQUIRE(std::filesystem::exists(meta_path));
  const std::string meta = slurp(meta_path);
  const auto j = nlohmann::json::parse(meta);
  CHECK(j["n_segments"] == res.segmentation.num_segments());
  CHECK(j["delta"].get<double>() == res.delta);
  CHECK(j["config"]["target_segments"] == "30");
  CHECK(j["descriptors"]["normals_estimated"] == 1);
  CHECK(j.contains("timing"));

  auto replay = replay_config(meta);
  replay.set("out_labels", (f.dir / "replay.txt").string());
  const auto again = run(replay);
  CHECK(again.delta == res.delta);
  CHECK(again.segmentation.labels == res.segmentation.labels);
  CHECK(slurp(f.dir / "labels.txt") == slurp(f.dir / "replay.txt"));
  CHECK(read_labels(f.dir / "labels.txt") == res.segmentation.labels);
  CHECK_THROWS_AS(replay_config("{\"config\": {}}"), Error);
  CHECK_THROWS_AS(replay_config("not json"), Error);
}

TEST_CASE("outputs: labels, segmented ply, label image") {
  Frame f;
  auto cfg = f.config();
  cfg.set("preset", "lv");
  cfg.set("delta", "0.3");
  cfg.set("out_labels", (f.dir / "l.txt").string());
  cfg.set("out_meta", (f.dir / "m.json").string());
  cfg.set("out_ply", (f.dir / "s.ply").string());
  cfg.set("out_label_image", (f.dir / "l.png").string());
  cfg.set("out_edges", (f.dir / "e.csv").string());
  cfg.set("out_weights", (f.dir / "w.csv").string());
  const auto res = run(cfg);
  CHECK(std::filesystem::exists(f.dir / "m.json"));
  CHECK(std::filesystem::exists(f.dir / "e.csv"));
  CHECK(std::filesystem::exists(f.dir / "w.csv"));
  const auto ply = load_ply(f.dir / "s.ply");
  REQUIRE(ply.size() == res.cloud.size());
  for (std::size_t i = 0; i < ply.size(); ++i) {
    const Rgb8 c = segment_color(res.segmentation.labels[i]);
    CHECK(ply.colors[i] == Vec3(c.r / 255.0, c.g / 255.0, c.b / 255.0));
  }
  const auto img = load_label_image(f.dir / "l.png");
  const auto& grid = *res.cloud.grid;
  for (std::size_t k = 0; k < img.size(); ++k) {
    const auto p = grid.pixel_to_point[k];
    CHECK(img.data[k] == (p < 0 ? 0 : static_cast<std::int64_t>(res.segmentation.labels[p]) + 1));
  }
}

TEST_CASE("ply input: knn by default, grid8 rejected") {
  Frame f;
  const auto cloud = load_input(f.config());
  write_ply(cloud, f.dir / "c.ply");
  RunConfig cfg;
  cfg.set("ply", (f.dir / "c.ply").string());
  cfg.set("delta", "0.5");
  cfg.set("preset", "outdoor");
  const auto res = run(cfg);
  CHECK(res.segmentation.graph == GraphMethod::kKnn);
  CHECK(res.segmentation.num_points() == cloud.size());
  cfg.set("graph", "grid8");
  try {
    run(cfg);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.stage() == "config");
    CHECK(std::string(e.what()).find("graph") != std::string::npos);
  }
}

TEST_CASE("stage errors carry the stage name") {
  RunConfig cfg;
  cfg.set("ply", "/nonexistent/cloud.ply");
  cfg.set("delta", "0.5");
  try {
    run(cfg);
    FAIL("expected an ingest error");
  } catch (const Error& e) {
    CHECK(e.stage() == "ingest");
    CHECK(std::string(e.what()).find("/nonexistent/cloud.ply") != std::string::npos);
  }
  Frame f;
  auto rgbd = f.config();
  rgbd.set("delta", "0.5");
  rgbd.set("gt", (f.dir / "missing_gt.png").string());
  try {
    run(rgbd);
    FAIL("expected a stage error");
  } catch (const Error& e) {
    CHECK_FALSE(e.stage().empty());
    CHECK(e.stage() != "config");
  }
}

TEST_CASE("sweeps share one setup and are deterministic") {
  Frame f;
  auto cfg = f.config();
  cfg.set("gt", (f.dir / "gt.png").string());
  cfg.set("out_csv", (f.dir / "sweep.csv").string());
  const auto a = run_sweep(cfg, {10, 40});
  REQUIRE(a.size() == 2);
  const std::string first = slurp(f.dir / "sweep.csv");
  const auto b = run_sweep(cfg, {10, 40});
  CHECK(slurp(f.dir / "sweep.csv") == first);
  CHECK(a[0].target_segments == 10);
  CHECK(a[1].n_segments == b[1].n_segments);
  const auto d = run_sweep_deltas(cfg, {0.1, 1.0});
  REQUIRE(d.size() == 2);
  CHECK(d[0].n_segments >= d[1].n_segments);
  CHECK_THROWS_AS(run_sweep(cfg, {}), Error);
}

TEST_CASE("random sweep targets mostly land within five percent") {
  Frame f(160, 120, 17);
  auto cfg = f.config();
  cfg.set("gt", (f.dir / "gt.png").string());
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(50, 1000);
  std::vector<std::size_t> targets(20);
  for (auto& t : targets) t = pick(rng);
  const auto records = run_sweep(cfg, targets);
  REQUIRE(records.size() == targets.size());
  int hits = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].target_segments == targets[i]);
    const double gap = std::abs(static_cast<double>(records[i].n_segments) - static_cast<double>(targets[i]));
    if (gap <= 0.05 * static_cast<double>(targets[i])) ++hits;
  }
  CHECK(hits >= 16);
}

TEST_CASE("label file parsing") {
  oracle::TempDir dir("labels");
  std::ofstream(dir / "ok.txt") << "0 3\n1 3\n2 0\n";
  CHECK(read_labels(dir / "ok.txt") == std::vector<std::uint32_t>{3, 3, 0});
  std::ofstream(dir / "gap.txt") << "0 3\n2 3\n";
  CHECK_THROWS_AS(read_labels(dir / "gap.txt"), Error);
  std::ofstream(dir / "junk.txt") << "0 3 9\n";
  CHECK_THROWS_AS(read_labels(dir / "junk.txt"), Error);
}
