#include "support/scenes.hpp"
#include "voxstream/errors.hpp"
#include "voxstream/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace voxstream;

namespace {

ExperimentSpec small_experiment(bool noisy = false, int frames = 6) {
  ExperimentSpec spec;
  spec.scene = testing::small_scene(frames, 80, 60, noisy);
  spec.grid = testing::small_grid();
  spec.clients = {ClientGroup{}};
  return spec;
}

std::string timeline_csv(const MetricsTimeline& tl) {
  std::ostringstream os;
  tl.write_csv(os);
  return os.str();
}

template <class Set>
std::set<BlockPosition> sorted(const Set& s) {
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("virtual-clock runs are deterministic") {
  ExperimentSpec spec = small_experiment(true);
  spec.clients = {ClientGroup{2, 50.0, 64}};
  const ExperimentResult a = run_experiment(spec, Variant::Ours);
  const ExperimentResult b = run_experiment(spec, Variant::Ours);
  CHECK(summary_row(a) == summary_row(b));
  REQUIRE(a.clients.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(timeline_csv(a.clients[i].timeline) == timeline_csv(b.clients[i].timeline));
    CHECK(a.clients[i].delays == b.clients[i].delays);
  }
}

TEST_CASE("client models converge to their bounds") {
  ExperimentSpec spec = small_experiment(true, 8);
  ClientGroup early;
  early.mode = ClientMode::Exploration;
  early.package_size = 64;
  ClientGroup late = early;
  late.join_time = 0.12;
  ClientGroup after = early;
  after.join_time = 1.0;
  spec.clients = {early, late, after};
  for (Variant v : {Variant::Ours, Variant::Base}) {
    const ExperimentResult r = run_experiment(spec, v);
    REQUIRE(r.quiescent);
    REQUIRE(r.server);
    const auto update_set = sorted(r.server->update_set());
    const std::vector<BlockPosition> mc_vec = r.server->mc().positions();
    const std::set<BlockPosition> mc(mc_vec.begin(), mc_vec.end());
    REQUIRE(r.clients.size() == 3);

    // From the start: exactly the update set.
    CHECK(sorted(r.clients[0].received) == update_set);
    CHECK(r.clients[0].timeline.back().client_blocks == update_set.size());
    // Mid-capture join: baseline plus everything emitted afterwards.
    CHECK(sorted(r.clients[1].received) == sorted(r.clients[1].expected));
    CHECK(r.clients[1].received.size() <= update_set.size());
    CHECK(r.clients[1].baseline_blocks > 0);
    // Join at quiescence: the compact model.
    CHECK(sorted(r.clients[2].received) == mc);
    CHECK(mc.size() <= update_set.size());

    for (const ClientReport& c : r.clients) {
      REQUIRE(c.mesh);
      CHECK(extract_triangles(*c.mesh).vertices == extract_triangles(r.server->mc(), spec.grid).vertices);
    }
  }
}

TEST_CASE("pruning variant streams fewer blocks than base") {
  const ExperimentSpec spec = small_experiment(true, 8);
  const ExperimentResult base = run_experiment(spec, Variant::Base);
  const ExperimentResult ours = run_experiment(spec, Variant::Ours);
  CHECK(base.final_stats.mc_blocks == base.final_stats.update_set);
  CHECK(base.final_stats.tsdf_blocks == base.final_stats.update_set);
  CHECK(ours.final_stats.update_set < base.final_stats.update_set);
  CHECK(ours.final_stats.mc_blocks <= ours.final_stats.update_set);
  CHECK(ours.final_stats.tsdf_blocks < base.final_stats.tsdf_blocks);
  REQUIRE(base.mesh_rms);
  REQUIRE(ours.mesh_rms);
  CHECK(*ours.mesh_rms < 0.02);
}

TEST_CASE("trace replay reproduces the live run") {
  ExperimentSpec spec = small_experiment(true);
  spec.clients = {ClientGroup{3, 60.0, 48}};
  spec.client_bandwidth_bits_s = 50e6;
  spec.server_bandwidth_bits_s = 80e6;
  const ExperimentResult live = run_experiment(spec, Variant::Ours);
  const ExperimentResult replay = replay_experiment(spec, Variant::Ours, live.trace);
  CHECK(replay.max_delay == live.max_delay);
  CHECK(replay.end_time == live.end_time);
  REQUIRE(replay.clients.size() == live.clients.size());
  for (std::size_t i = 0; i < live.clients.size(); ++i) {
    CHECK(replay.clients[i].delays == live.clients[i].delays);
    CHECK(replay.clients[i].bytes == live.clients[i].bytes);
    CHECK(sorted(replay.clients[i].received) == sorted(live.clients[i].received));
  }
}

TEST_CASE("bandwidth limits raise delay and scalability search is stable") {
  ExperimentSpec spec = small_experiment(true);
  spec.clients = {ClientGroup{1, 100.0, 128}};
  spec.client_bandwidth_bits_s = 200e6;
  spec.server_bandwidth_bits_s = 400e6;
  spec.delay_threshold = 0.5;
  const ExperimentResult live = run_experiment(spec, Variant::Ours);
  const ScalabilityResult a = find_max_clients(spec, Variant::Ours, live.trace, 64);
  const ScalabilityResult b = find_max_clients(spec, Variant::Ours, live.trace, 64);
  CHECK(a.max_clients == b.max_clients);
  CHECK(a.probes == b.probes);
  CHECK(a.max_clients >= 1);
  CHECK(a.max_clients < 64);
  CHECK(a.probes.at(a.max_clients) <= spec.delay_threshold);
  CHECK(a.probes.at(a.max_clients + 1) > spec.delay_threshold);

  spec.clients[0].count = a.max_clients + 1;
  CHECK(replay_experiment(spec, Variant::Ours, live.trace).max_delay > spec.delay_threshold);
}

TEST_CASE("unbounded drain is reported as infinite delay") {
  ExperimentSpec spec = small_experiment(false, 4);
  spec.clients = {ClientGroup{1, 1.0, 1}};
  spec.max_drain_time = 0.5;
  const ExperimentResult r = run_experiment(spec, Variant::Base);
  CHECK_FALSE(r.quiescent);
  CHECK(std::isinf(r.max_delay));
}

TEST_CASE("experiment spec parsing") {
  const auto dir = std::filesystem::temp_directory_path() / "voxstream_exp_spec";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "scene.json") << R"({"primitives": [{"type": "sphere", "center": [0, 0, 0], "radius": 0.3}],
                                          "camera": {"width": 32, "height": 24}, "frames": 3})";
  const ExperimentSpec s = parse_experiment_spec(R"({
    "scene": "scene.json", "variants": ["base", "ours"],
    "clients": [{"count": 2, "rate": 12, "package": 256, "mode": "explore", "join_time": 0.5}],
    "client_bandwidth_bits_s": 1e8, "seed": 4})",
                                                 dir);
  REQUIRE(s.scene);
  CHECK(s.scene->frames == 3);
  CHECK(s.variants == std::vector<Variant>{Variant::Base, Variant::Ours});
  REQUIRE(s.clients.size() == 1);
  CHECK(s.clients[0].count == 2);
  CHECK(s.clients[0].request_rate == 12.0);
  CHECK(s.clients[0].mode == ClientMode::Exploration);
  CHECK(s.clients[0].join_time == 0.5);
  CHECK(s.client_bandwidth_bits_s == 1e8);
  CHECK(s.seed == 4u);
  CHECK_THROWS(parse_experiment_spec(R"({"variants": ["nope"]})", dir));
  CHECK_THROWS(parse_experiment_spec(R"({"scene": "scene.json", "clients": [{"rate": 0}]})", dir));
  CHECK_THROWS(parse_experiment_spec(R"({"variants": ["ours"]})", dir));  // no frame source
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiment outputs") {
  ExperimentSpec spec = small_experiment(false, 3);
  const ExperimentResult r = run_experiment(spec, Variant::Ours);
  const auto dir = std::filesystem::temp_directory_path() / "voxstream_exp_out";
  write_experiment_outputs(dir, {&r});
  std::ifstream in(dir / "summary.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == kSummaryCsvHeader);
  CHECK(row == summary_row(r));
  CHECK(row.rfind("ours,1,100,512,", 0) == 0);
  CHECK(std::filesystem::exists(dir / "ours_client0.csv"));
  std::filesystem::remove_all(dir);
}
