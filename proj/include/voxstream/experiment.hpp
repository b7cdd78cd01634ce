#pragma once

#include "voxstream/capture.hpp"
#include "voxstream/client.hpp"
#include "voxstream/datagen.hpp"
#include "voxstream/server.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace voxstream {

struct ClientGroup {
  int count = 1;
  double request_rate = 100.0;
  std::size_t package_size = 512;
  ClientMode mode = ClientMode::Benchmark;
  double join_time = 0.0;          // seconds of virtual time
  double bandwidth_bits_s = 0.0;   // per-client link; 0 uses the spec-wide value
};

struct ExperimentSpec {
  std::optional<SceneSpec> scene;
  std::optional<std::filesystem::path> dataset;
  std::vector<Variant> variants{Variant::Ours};
  std::vector<ClientGroup> clients{ClientGroup{}};
  GridConfig grid;
  double client_bandwidth_bits_s = 0.0;  // 0 = unlimited
  double server_bandwidth_bits_s = 0.0;  // shared egress link, 0 = unlimited
  double reconstruction_rate = 30.0;
  double delay_threshold = 1.0;
  double sample_rate = 10.0;
  double max_drain_time = 60.0;  // virtual seconds allowed after capture ends
  int max_frames = 0;            // 0 = all frames of the source
  std::optional<std::uint64_t> seed;  // overrides the scene noise seed

  void validate() const;
};

/// Parses an experiment description; relative paths resolve against base_dir.
ExperimentSpec parse_experiment_spec(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct ClientReport {
  ClientId id = 0;
  ClientGroup group;
  MetricsTimeline timeline;
  std::vector<double> delays;  // per delivered block, seconds
  double max_delay = 0.0;      // includes blocks still queued at the end
  std::uint64_t bytes = 0;
  std::uint64_t requests = 0;
  std::unordered_set<BlockPosition> received;
  /// Baseline at registration plus every position emitted afterwards.
  std::unordered_set<BlockPosition> expected;
  std::size_t baseline_blocks = 0;
  std::unique_ptr<ClientMesh> mesh;  // exploration clients only

  double mean_bandwidth_bits_s(double end_time) const;
};

struct FrameRecord {
  double t = 0.0;
  std::vector<BlockPosition> p_mc;
  ServerStats stats;  // after the frame
};

/// What the server emitted during a live run, enough to replay the stream
/// sets for any number of benchmark clients without reconstructing again.
struct StreamTrace {
  std::vector<FrameRecord> frames;
  std::map<double, std::vector<BlockPosition>> baselines;  // MC model positions at each join time
};

struct ExperimentResult {
  Variant variant = Variant::Ours;
  std::vector<ClientReport> clients;
  ServerStats final_stats;
  std::size_t frames = 0;
  double capture_end = 0.0;
  double end_time = 0.0;
  bool quiescent = false;
  double max_delay = 0.0;  // over all clients, infinity if not quiescent
  double mean_bandwidth_bits_s = 0.0;
  std::optional<double> mesh_rms;  // server mesh against the analytic scene
  std::size_t mesh_triangles = 0;
  std::unique_ptr<ServerState> server;
  std::unique_ptr<TsdfModel> model;
  StreamTrace trace;
};

/// Reconstruction, server and clients in one deterministic discrete-event
/// loop on a virtual clock.
ExperimentResult run_experiment(const ExperimentSpec& spec, Variant variant);

/// Replays a recorded trace for the spec's client groups (benchmark clients only).
ExperimentResult replay_experiment(const ExperimentSpec& spec, Variant variant, const StreamTrace& trace);

struct ScalabilityResult {
  Variant variant = Variant::Ours;
  int max_clients = 0;
  std::map<int, double> probes;  // client count -> max delay
};

/// Largest number of clients of the spec's first group whose max delay
/// stays within the threshold. Exponential then binary search on a replayed trace.
ScalabilityResult find_max_clients(const ExperimentSpec& spec, Variant variant, const StreamTrace& trace,
                                   int limit = 4096);
ScalabilityResult find_max_clients(const ExperimentSpec& spec, Variant variant, int limit = 4096);

inline constexpr const char* kSummaryCsvHeader =
    "variant,clients,rate,package,max_delay_s,mean_bandwidth_bits_s,final_mc_blocks,final_update_set,final_tsdf_blocks";

/// Writes summary.csv and one metrics CSV per client into dir.
void write_experiment_outputs(const std::filesystem::path& dir, const std::vector<const ExperimentResult*>& results);
std::string summary_row(const ExperimentResult& r);

/// RMS of the unsigned scene distance over all mesh vertices.
double mesh_rms_error(const TriangleMesh& mesh, const SyntheticScene& scene);

}  // namespace voxstream
