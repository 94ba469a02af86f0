#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "pclv/pclv.h"

namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path path;
  Dir() {
    path = fs::temp_directory_path() / ("pclv_capi_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

pclv_config* room_config(const Dir& d, std::size_t w = 48, std::size_t h = 36) {
  REQUIRE(pclv_synth_scene("room", 11, w, h, d.path.c_str()) == PCLV_OK);
  pclv_config* cfg = nullptr;
  REQUIRE(pclv_config_create(&cfg) == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "depth", (d / "depth.png").c_str()) == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "rgb", (d / "rgb.png").c_str()) == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "intrinsics", (d / "intrinsics.txt").c_str()) == PCLV_OK);
  return cfg;
}

}  // namespace

TEST_CASE("version and empty error state") {
  CHECK(std::string(pclv_version()).size() > 0);
  CHECK(pclv_last_error() != nullptr);
  CHECK(pclv_last_error_stage() != nullptr);
}

TEST_CASE("null handles are rejected, not dereferenced") {
  CHECK(pclv_config_create(nullptr) == PCLV_ERR_INVALID_ARGUMENT);
  CHECK(pclv_config_set(nullptr, "k", "3") == PCLV_ERR_INVALID_ARGUMENT);
  CHECK(pclv_run(nullptr, nullptr) == PCLV_ERR_INVALID_ARGUMENT);
  CHECK(std::string(pclv_last_error()).size() > 0);
  pclv_config_destroy(nullptr);
  pclv_result_destroy(nullptr);
  pclv_records_destroy(nullptr);
  pclv_cloud_destroy(nullptr);
}

TEST_CASE("config set, get and validate") {
  pclv_config* cfg = nullptr;
  REQUIRE(pclv_config_create(&cfg) == PCLV_OK);
  const char* v = nullptr;
  REQUIRE(pclv_config_get(cfg, "graph", &v) == PCLV_OK);
  CHECK(std::string(v) == "auto");
  CHECK(pclv_config_set(cfg, "k", "zero") == PCLV_ERR_INVALID_ARGUMENT);
  CHECK(std::string(pclv_last_error()).find("k") != std::string::npos);
  CHECK(pclv_config_set(cfg, "nope", "1") == PCLV_ERR_INVALID_ARGUMENT);
  CHECK(pclv_config_get(cfg, "nope", &v) == PCLV_ERR_INVALID_ARGUMENT);

  std::size_t count = 0;
  const char* text = nullptr;
  REQUIRE(pclv_config_validate(cfg, &count, &text) == PCLV_OK);
  CHECK(count >= 2);
  CHECK(std::string(text).find("delta") != std::string::npos);

  REQUIRE(pclv_config_set(cfg, "ply", "x.ply") == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "target_segments", "50") == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "graph", "grid8") == PCLV_OK);
  REQUIRE(pclv_config_validate(cfg, &count, &text) == PCLV_OK);
  CHECK(count == 1);  // grid8 cannot be used with a ply
  CHECK(std::string(text).rfind("graph:", 0) == 0);
  REQUIRE(pclv_config_set(cfg, "graph", "knn") == PCLV_OK);
  REQUIRE(pclv_config_validate(cfg, &count, &text) == PCLV_OK);
  CHECK(count == 0);
  CHECK(std::string(text).empty());

  pclv_result* res = nullptr;
  REQUIRE(pclv_config_set(cfg, "k", "0") == PCLV_OK);
  CHECK(pclv_run(cfg, &res) == PCLV_ERR_INVALID_ARGUMENT);
  CHECK(res == nullptr);
  CHECK(std::string(pclv_last_error_stage()) == "config");
  pclv_config_destroy(cfg);
}

TEST_CASE("config files load through the api") {
  Dir d;
  std::ofstream(d / "a.cfg") << "preset = dn\nk = 7\n";
  pclv_config* cfg = nullptr;
  REQUIRE(pclv_config_create(&cfg) == PCLV_OK);
  REQUIRE(pclv_config_load_file(cfg, (d / "a.cfg").c_str()) == PCLV_OK);
  const char* v = nullptr;
  REQUIRE(pclv_config_get(cfg, "k", &v) == PCLV_OK);
  CHECK(std::string(v) == "7");
  CHECK(pclv_config_load_file(cfg, (d / "missing.cfg").c_str()) == PCLV_ERR_IO);
  pclv_config_destroy(cfg);
}

TEST_CASE("run, result accessors and replay") {
  Dir d;
  pclv_config* cfg = room_config(d);
  REQUIRE(pclv_config_set(cfg, "target_segments", "25") == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "gt", (d / "gt.png").c_str()) == PCLV_OK);
  pclv_result* res = nullptr;
  REQUIRE(pclv_run(cfg, &res) == PCLV_OK);
  const std::size_t n = pclv_result_num_points(res);
  CHECK(n > 0);
  std::vector<std::uint32_t> labels(n);
  REQUIRE(pclv_result_labels(res, labels.data(), labels.size()) == PCLV_OK);
  const std::set<std::uint32_t> distinct(labels.begin(), labels.end());
  CHECK(distinct.size() == pclv_result_num_segments(res));
  CHECK(*distinct.rbegin() + 1 == distinct.size());
  CHECK(pclv_result_within_tolerance(res) == 1);
  CHECK(pclv_result_delta(res) > 0.0);

  REQUIRE(pclv_result_has_metrics(res) == 1);
  pclv_metrics m{};
  REQUIRE(pclv_result_metrics(res, &m) == PCLV_OK);
  CHECK(m.boundary_recall >= 0.0);
  CHECK(m.boundary_recall <= 1.0);
  CHECK(m.n_segments == pclv_result_num_segments(res));
  CHECK(m.delta == pclv_result_delta(res));

  std::int64_t c = -1;
  REQUIRE(pclv_result_counter(res, "normals_estimated", &c) == PCLV_OK);
  CHECK(c == 1);
  REQUIRE(pclv_result_counter(res, "n_edges", &c) == PCLV_OK);
  CHECK(c > 0);
  CHECK(pclv_result_counter(res, "bogus", &c) == PCLV_ERR_INVALID_ARGUMENT);

  CHECK(pclv_result_stage_count(res) >= 6);
  const char* stage = nullptr;
  double secs = -1;
  REQUIRE(pclv_result_stage(res, 0, &stage, &secs) == PCLV_OK);
  CHECK(std::string(stage) == "ingest");
  CHECK(secs >= 0.0);
  CHECK(pclv_result_stage(res, 99, &stage, &secs) == PCLV_ERR_INVALID_ARGUMENT);
  CHECK(pclv_result_total_seconds(res) >= secs);

  pclv_config* replay = nullptr;
  REQUIRE(pclv_config_from_metadata(pclv_result_metadata_json(res), &replay) == PCLV_OK);
  pclv_result* again = nullptr;
  REQUIRE(pclv_run(replay, &again) == PCLV_OK);
  std::vector<std::uint32_t> labels2(n);
  REQUIRE(pclv_result_labels(again, labels2.data(), labels2.size()) == PCLV_OK);
  CHECK(labels2 == labels);
  CHECK(pclv_result_delta(again) == pclv_result_delta(res));

  pclv_result_destroy(again);
  pclv_config_destroy(replay);
  pclv_result_destroy(res);
  pclv_config_destroy(cfg);
}

TEST_CASE("runs without ground truth have no metrics") {
  Dir d;
  pclv_config* cfg = room_config(d);
  REQUIRE(pclv_config_set(cfg, "delta", "0.4") == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "preset", "lv") == PCLV_OK);
  pclv_result* res = nullptr;
  REQUIRE(pclv_run(cfg, &res) == PCLV_OK);
  CHECK(pclv_result_has_metrics(res) == 0);
  pclv_metrics m{};
  CHECK(pclv_result_metrics(res, &m) == PCLV_ERR_PRECONDITION);
  std::int64_t c = -1;
  REQUIRE(pclv_result_counter(res, "normals_estimated", &c) == PCLV_OK);
  CHECK(c == 0);
  pclv_result_destroy(res);
  pclv_config_destroy(cfg);
}

TEST_CASE("missing inputs report an io error with the ingest stage") {
  pclv_config* cfg = nullptr;
  REQUIRE(pclv_config_create(&cfg) == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "ply", "/nonexistent/x.ply") == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "graph", "knn") == PCLV_OK);
  REQUIRE(pclv_config_set(cfg, "delta", "1") == PCLV_OK);
  pclv_result* res = nullptr;
  CHECK(pclv_run(cfg, &res) == PCLV_ERR_IO);
  CHECK(std::string(pclv_last_error_stage()) == "ingest");
  pclv_cloud* cloud = nullptr;
  CHECK(pclv_cloud_load(cfg, &cloud) == PCLV_ERR_IO);
  pclv_config_destroy(cfg);
}

TEST_CASE("sweeps return records and csv") {
  Dir d;
  pclv_config* cfg = room_config(d);
  REQUIRE(pclv_config_set(cfg, "gt", (d / "gt.png").c_str()) == PCLV_OK);
  const std::size_t targets[] = {10, 30};
  pclv_records* recs = nullptr;
  REQUIRE(pclv_sweep_targets(cfg, targets, 2, &recs) == PCLV_OK);
  REQUIRE(pclv_records_count(recs) == 2);
  pclv_record r{};
  REQUIRE(pclv_records_get(recs, 1, &r) == PCLV_OK);
  CHECK(r.target_segments == 30);
  CHECK(r.n_segments > 0);
  CHECK(pclv_records_get(recs, 2, &r) == PCLV_ERR_INVALID_ARGUMENT);
  const std::string csv = pclv_records_csv(recs);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  pclv_records* again = nullptr;
  REQUIRE(pclv_sweep_targets(cfg, targets, 2, &again) == PCLV_OK);
  CHECK(std::string(pclv_records_csv(again)) == csv);
  pclv_records_destroy(again);
  pclv_records_destroy(recs);

  const double deltas[] = {0.05, 5.0};
  REQUIRE(pclv_sweep_deltas(cfg, deltas, 2, &recs) == PCLV_OK);
  pclv_record a{}, b{};
  REQUIRE(pclv_records_get(recs, 0, &a) == PCLV_OK);
  REQUIRE(pclv_records_get(recs, 1, &b) == PCLV_OK);
  CHECK(a.target_segments == 0);
  CHECK(a.n_segments >= b.n_segments);
  pclv_records_destroy(recs);

  CHECK(pclv_sweep_targets(cfg, targets, 0, &recs) != PCLV_OK);
  pclv_config_destroy(cfg);
}

TEST_CASE("array and file evaluation") {
  const std::int64_t gt[] = {0, 0, 1, 1, 0, 0, 1, 1};
  pclv_metrics m{};
  REQUIRE(pclv_eval_arrays(4, 2, gt, gt, 2.0, &m) == PCLV_OK);
  CHECK(m.boundary_recall == 1.0);
  CHECK(m.under_seg_error == 0.0);
  CHECK(m.gt_segments == 2);
  const std::int64_t one[] = {5, 5, 5, 5, 5, 5, 5, 5};
  REQUIRE(pclv_eval_arrays(4, 2, one, gt, 2.0, &m) == PCLV_OK);
  CHECK(m.under_seg_error == 4.0);  // 8 leaked pixels over 2 gt segments
  CHECK(m.boundary_recall == 0.0);
  CHECK(pclv_eval_arrays(4, 2, one, gt, -1.0, &m) == PCLV_ERR_INVALID_ARGUMENT);

  Dir d;
  REQUIRE(pclv_synth_scene("corner", 1, 40, 30, d.path.c_str()) == PCLV_OK);
  REQUIRE(pclv_eval_label_files((d / "gt.png").c_str(), (d / "gt.png").c_str(), 2.0, 1, 0, &m) == PCLV_OK);
  CHECK(m.boundary_recall == 1.0);
  CHECK(m.under_seg_error == 0.0);
  CHECK(pclv_eval_label_files((d / "none.png").c_str(), (d / "gt.png").c_str(), 2.0, 1, 0, &m) == PCLV_ERR_IO);
  CHECK(pclv_synth_scene("forest", 1, 40, 30, d.path.c_str()) == PCLV_ERR_INVALID_ARGUMENT);
}

TEST_CASE("convert, load and colorize") {
  Dir d;
  pclv_config* cfg = room_config(d, 32, 24);
  REQUIRE(pclv_convert_rgbd((d / "depth.png").c_str(), (d / "rgb.png").c_str(), (d / "intrinsics.txt").c_str(),
                            (d / "c.ply").c_str(), 0) == PCLV_OK);
  pclv_cloud* grid_cloud = nullptr;
  REQUIRE(pclv_cloud_load(cfg, &grid_cloud) == PCLV_OK);
  CHECK(pclv_cloud_has_grid(grid_cloud) == 1);

  pclv_config* ply = nullptr;
  REQUIRE(pclv_config_create(&ply) == PCLV_OK);
  REQUIRE(pclv_config_set(ply, "ply", (d / "c.ply").c_str()) == PCLV_OK);
  pclv_cloud* cloud = nullptr;
  REQUIRE(pclv_cloud_load(ply, &cloud) == PCLV_OK);
  CHECK(pclv_cloud_has_grid(cloud) == 0);
  const std::size_t n = pclv_cloud_size(cloud);
  REQUIRE(n == pclv_cloud_size(grid_cloud));
  std::vector<double> a(3 * n), b(3 * n);
  REQUIRE(pclv_cloud_positions(cloud, a.data(), n) == PCLV_OK);
  REQUIRE(pclv_cloud_positions(grid_cloud, b.data(), n) == PCLV_OK);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
  REQUIRE(pclv_cloud_colors(cloud, a.data(), n) == PCLV_OK);
  for (double c : a) {
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }

  {
    std::ofstream out(d / "labels.txt");
    for (std::size_t i = 0; i < n; ++i) out << i << ' ' << (i % 3) << '\n';
  }
  REQUIRE(pclv_colorize_labels(ply, (d / "labels.txt").c_str(), (d / "seg.ply").c_str()) == PCLV_OK);
  pclv_config* seg = nullptr;
  REQUIRE(pclv_config_create(&seg) == PCLV_OK);
  REQUIRE(pclv_config_set(seg, "ply", (d / "seg.ply").c_str()) == PCLV_OK);
  pclv_cloud* colored = nullptr;
  REQUIRE(pclv_cloud_load(seg, &colored) == PCLV_OK);
  std::vector<double> rgb(3 * n);
  REQUIRE(pclv_cloud_colors(colored, rgb.data(), n) == PCLV_OK);
  std::set<std::vector<double>> colors;
  for (std::size_t i = 0; i < n; ++i) {
    colors.insert({rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]});
    if (i >= 3) {
      CHECK(rgb[3 * i] == rgb[3 * (i - 3)]);
    }
  }
  CHECK(colors.size() == 3);

  std::ofstream(d / "short.txt") << "0 1\n";
  CHECK(pclv_colorize_labels(ply, (d / "short.txt").c_str(), (d / "bad.ply").c_str()) != PCLV_OK);

  pclv_cloud_destroy(colored);
  pclv_config_destroy(seg);
  pclv_cloud_destroy(cloud);
  pclv_config_destroy(ply);
  pclv_cloud_destroy(grid_cloud);
  pclv_config_destroy(cfg);
}
