#include "voxstream/experiment.hpp"

#include "voxstream/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

namespace voxstream {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ClientMode parse_mode(const std::string& s) {
  if (s == "bench" || s == "benchmark") return ClientMode::Benchmark;
  if (s == "explore" || s == "exploration") return ClientMode::Exploration;
  throw ArgumentError("unknown client mode '" + s + "' (expected bench or explore)");
}

}  // namespace

void ExperimentSpec::validate() const {
  if (scene.has_value() == dataset.has_value()) throw ArgumentError("experiment needs exactly one of scene or dataset");
  if (variants.empty()) throw ArgumentError("experiment needs at least one variant");
  grid.validate();
  for (const ClientGroup& g : clients) {
    if (g.count < 0) throw ArgumentError("client count must be non-negative");
    if (!(g.request_rate > 0.0)) throw ArgumentError("request rate must be positive");
    if (g.package_size < 1) throw ArgumentError("package size must be at least 1");
    if (g.join_time < 0.0) throw ArgumentError("join time must be non-negative");
    if (g.bandwidth_bits_s < 0.0) throw ArgumentError("client bandwidth must be non-negative");
  }
  if (client_bandwidth_bits_s < 0.0 || server_bandwidth_bits_s < 0.0)
    throw ArgumentError("bandwidth must be non-negative");
  if (!(reconstruction_rate > 0.0)) throw ArgumentError("reconstruction rate must be positive");
  if (!(delay_threshold > 0.0)) throw ArgumentError("delay threshold must be positive");
  if (!(sample_rate > 0.0)) throw ArgumentError("sample rate must be positive");
  if (max_drain_time < 0.0) throw ArgumentError("max drain time must be non-negative");
  if (max_frames < 0) throw ArgumentError("max_frames must be non-negative");
}

ExperimentSpec parse_experiment_spec(const std::string& json_text, const std::filesystem::path& base_dir) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("experiment spec is not valid JSON: ") + e.what());
  }
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  ExperimentSpec spec;
  try {
    if (j.contains("scene")) {
      const json& s = j["scene"];
      spec.scene = s.is_string() ? load_scene_spec(resolve(s.get<std::string>())) : parse_scene_spec(s.dump());
    }
    if (j.contains("dataset")) spec.dataset = resolve(j["dataset"].get<std::string>());
    if (j.contains("variants")) {
      spec.variants.clear();
      for (const json& v : j["variants"]) spec.variants.push_back(parse_variant(v.get<std::string>()));
    } else if (j.contains("variant")) {
      spec.variants = {parse_variant(j["variant"].get<std::string>())};
    }
    if (j.contains("clients")) {
      spec.clients.clear();
      for (const json& c : j["clients"]) {
        ClientGroup g;
        g.count = c.value("count", g.count);
        g.request_rate = c.value("rate", g.request_rate);
        g.package_size = c.value("package", g.package_size);
        if (c.contains("mode")) g.mode = parse_mode(c["mode"].get<std::string>());
        g.join_time = c.value("join_time", g.join_time);
        g.bandwidth_bits_s = c.value("bandwidth_bits_s", g.bandwidth_bits_s);
        spec.clients.push_back(g);
      }
    }
    if (j.contains("grid")) {
      const json& g = j["grid"];
      spec.grid.voxel_size = g.value("voxel_size", spec.grid.voxel_size);
      spec.grid.truncation = g.value("truncation", spec.grid.truncation);
      spec.grid.tsdf_bucket_count = g.value("tsdf_bucket_count", spec.grid.tsdf_bucket_count);
      spec.grid.mc_bucket_count = g.value("mc_bucket_count", spec.grid.mc_bucket_count);
      spec.grid.tsdf_pool_blocks = g.value("tsdf_pool_blocks", spec.grid.tsdf_pool_blocks);
      spec.grid.mc_pool_blocks = g.value("mc_pool_blocks", spec.grid.mc_pool_blocks);
    }
    spec.client_bandwidth_bits_s = j.value("client_bandwidth_bits_s", spec.client_bandwidth_bits_s);
    spec.server_bandwidth_bits_s = j.value("server_bandwidth_bits_s", spec.server_bandwidth_bits_s);
    spec.reconstruction_rate = j.value("reconstruction_rate", spec.reconstruction_rate);
    spec.delay_threshold = j.value("delay_threshold", spec.delay_threshold);
    spec.sample_rate = j.value("sample_rate", spec.sample_rate);
    spec.max_drain_time = j.value("max_drain_time", spec.max_drain_time);
    spec.max_frames = j.value("max_frames", spec.max_frames);
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("invalid experiment spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open experiment spec " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment_spec(ss.str(), path.parent_path());
}

double ClientReport::mean_bandwidth_bits_s(double end_time) const {
  const double span = end_time - group.join_time;
  return span > 0.0 ? 8.0 * static_cast<double>(bytes) / span : 0.0;
}

double mesh_rms_error(const TriangleMesh& mesh, const SyntheticScene& scene) {
  if (mesh.vertices.empty()) return 0.0;
  double sum = 0.0;
  for (const MeshVertex& v : mesh.vertices) {
    const double d = scene.distance(v.position.cast<double>());
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(mesh.vertices.size()));
}

namespace {

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual const Intrinsics& intrinsics() const = 0;
  virtual std::size_t count() const = 0;
  virtual DepthFrame next() = 0;
};

class SceneSource : public FrameSource {
 public:
  SceneSource(const SceneSpec& spec, std::size_t limit)
      : spec_(spec), poses_(orbit_trajectory(spec.orbit.center, spec.orbit.radius, spec.frames, spec.orbit.target)) {
    spec_.scene.validate();
    count_ = limit > 0 ? std::min(limit, poses_.size()) : poses_.size();
  }
  const Intrinsics& intrinsics() const override { return spec_.intrinsics; }
  std::size_t count() const override { return count_; }
  DepthFrame next() override {
    const auto i = static_cast<std::uint32_t>(next_++);
    return render_frame(spec_.scene, poses_.at(i), spec_.intrinsics, spec_.noise, i).frame;
  }

 private:
  SceneSpec spec_;
  std::vector<Eigen::Matrix4d> poses_;
  std::size_t count_ = 0;
  std::size_t next_ = 0;
};

class DatasetSource : public FrameSource {
 public:
  DatasetSource(const std::filesystem::path& path, std::size_t limit) : reader_(path) {
    count_ = limit > 0 ? std::min<std::size_t>(limit, reader_.frame_count()) : reader_.frame_count();
  }
  const Intrinsics& intrinsics() const override { return reader_.intrinsics(); }
  std::size_t count() const override { return count_; }
  DepthFrame next() override {
    auto f = reader_.next();
    if (!f) throw FormatError("dataset ended early");
    return std::move(*f);
  }

 private:
  DatasetReader reader_;
  std::size_t count_ = 0;
};

/// The server side of the simulation.
class SimServer {
 public:
  virtual ~SimServer() = default;
  virtual std::size_t frame_count() const = 0;
  /// Processes frame i at virtual time t and queues its updates.
  virtual std::vector<BlockPosition> frame(std::size_t i, double t) = 0;
  virtual std::vector<BlockPosition> join(ClientId id, double t) = 0;
  virtual ServedPackage serve(ClientId id, std::size_t max_blocks, bool with_payload) = 0;
  virtual ServerStats stats() const = 0;
  virtual const StreamSets& streams() const = 0;
};

class LiveServer : public SimServer {
 public:
  LiveServer(const ExperimentSpec& spec, Variant v, StreamTrace& trace) : trace_(trace) {
    if (spec.scene) {
      SceneSpec scene = *spec.scene;
      if (spec.seed) scene.noise.seed = *spec.seed;
      source_ = std::make_unique<SceneSource>(scene, static_cast<std::size_t>(spec.max_frames));
    } else {
      source_ = std::make_unique<DatasetSource>(*spec.dataset, static_cast<std::size_t>(spec.max_frames));
    }
    pipeline_ = std::make_unique<ReconstructionPipeline>(pipeline_config(v, spec.grid), source_->intrinsics());
    server_ = std::make_unique<ServerState>(server_config(v, spec.grid));
  }

  std::size_t frame_count() const override { return source_->count(); }

  std::vector<BlockPosition> frame(std::size_t, double t) override {
    const protocol::FrameBatch batch = pipeline_->process(source_->next());
    std::vector<BlockPosition> p_mc = server_->integrate_batch(batch.positions, batch.blocks);
    server_->enqueue_updates(p_mc, t);
    trace_.frames.push_back({t, p_mc, server_->stats()});
    return p_mc;
  }

  std::vector<BlockPosition> join(ClientId id, double t) override {
    std::vector<BlockPosition> baseline = server_->mc().positions();
    trace_.baselines.try_emplace(t, baseline);
    server_->register_client(id, t);
    return baseline;
  }

  ServedPackage serve(ClientId id, std::size_t max_blocks, bool with_payload) override {
    return with_payload ? server_->serve_request(id, max_blocks) : server_->serve_positions(id, max_blocks);
  }

  ServerStats stats() const override { return server_->stats(); }
  const StreamSets& streams() const override { return server_->streams(); }

  std::unique_ptr<ServerState> take_server() { return std::move(server_); }
  std::unique_ptr<TsdfModel> take_model() { return std::make_unique<TsdfModel>(pipeline_->model()); }

 private:
  StreamTrace& trace_;
  std::unique_ptr<FrameSource> source_;
  std::unique_ptr<ReconstructionPipeline> pipeline_;
  std::unique_ptr<ServerState> server_;
};

class ReplayServer : public SimServer {
 public:
  explicit ReplayServer(const StreamTrace& trace) : trace_(trace) {}

  std::size_t frame_count() const override { return trace_.frames.size(); }

  std::vector<BlockPosition> frame(std::size_t i, double t) override {
    const FrameRecord& r = trace_.frames.at(i);
    streams_.enqueue(r.p_mc, t);
    current_ = r.stats;
    return r.p_mc;
  }

  std::vector<BlockPosition> join(ClientId id, double t) override {
    auto it = trace_.baselines.find(t);
    if (it == trace_.baselines.end()) throw ArgumentError("trace holds no baseline for this join time");
    streams_.add(id, it->second, t);
    return it->second;
  }

  ServedPackage serve(ClientId id, std::size_t max_blocks, bool with_payload) override {
    if (with_payload) throw ArgumentError("trace replay supports benchmark clients only");
    ServedPackage pkg;
    ClientSession& s = streams_.session(id);
    for (const PendingBlock& pb : streams_.pop(id, max_blocks)) {
      pkg.positions.push_back(pb.pos);
      pkg.enqueued_at.push_back(pb.enqueued_at);
    }
    ++s.requests;
    s.delivered_blocks += pkg.positions.size();
    return pkg;
  }

  ServerStats stats() const override { return current_; }
  const StreamSets& streams() const override { return streams_; }

 private:
  const StreamTrace& trace_;
  StreamSets streams_;
  ServerStats current_;
};

enum EventType : int { kFrame = 0, kDelivery = 1, kClient = 2, kSample = 3 };

struct Event {
  double t = 0.0;
  int type = kFrame;
  std::uint64_t seq = 0;
  std::size_t index = 0;  // frame or client index
  bool join = false;

  bool operator>(const Event& o) const {
    if (t != o.t) return t > o.t;
    if (type != o.type) return type > o.type;
    return seq > o.seq;
  }
};

struct SimClient {
  ClientReport report;
  std::unique_ptr<ClientRunner> runner;
  double bandwidth = 0.0;
  bool joined = false;
  bool outstanding = false;
  std::uint64_t tick = 0;
  double link_free = 0.0;
  ServedPackage in_flight;
};

ExperimentResult simulate(const ExperimentSpec& spec, Variant variant, SimServer& server) {
  ExperimentResult result;
  result.variant = variant;

  std::vector<SimClient> clients;
  for (const ClientGroup& g : spec.clients) {
    for (int i = 0; i < g.count; ++i) {
      SimClient c;
      c.report.id = static_cast<ClientId>(clients.size());
      c.report.group = g;
      c.bandwidth = g.bandwidth_bits_s > 0.0 ? g.bandwidth_bits_s : spec.client_bandwidth_bits_s;
      c.runner = std::make_unique<ClientRunner>(g.mode, spec.grid);
      clients.push_back(std::move(c));
    }
  }

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::uint64_t seq = 0;
  auto push = [&](double t, int type, std::size_t index, bool join = false) {
    events.push(Event{t, type, seq++, index, join});
  };

  const std::size_t n_frames = server.frame_count();
  for (std::size_t i = 0; i < n_frames; ++i) push(static_cast<double>(i) / spec.reconstruction_rate, kFrame, i);
  for (std::size_t c = 0; c < clients.size(); ++c) push(clients[c].report.group.join_time, kClient, c, true);
  push(0.0, kSample, 0);

  result.capture_end = n_frames > 0 ? static_cast<double>(n_frames - 1) / spec.reconstruction_rate : 0.0;
  const double deadline = result.capture_end + spec.max_drain_time;
  std::size_t frames_done = 0;
  std::size_t joined = 0;
  std::uint64_t sample_k = 0;
  double server_link_free = 0.0;
  double now = 0.0;

  auto sample_all = [&](double t) {
    const ServerStats st = server.stats();
    for (SimClient& c : clients) {
      if (!c.joined) continue;
      MetricsTimeline& tl = c.report.timeline;
      if (!tl.empty() && !(t > tl.back().t)) continue;
      MetricsSample s;
      s.t = t;
      s.server_tsdf = static_cast<std::int64_t>(st.tsdf_blocks);
      s.server_mc = static_cast<std::int64_t>(st.mc_blocks);
      s.update_set = static_cast<std::int64_t>(st.update_set);
      s.client_blocks = c.runner->client_blocks();
      s.bytes = c.runner->bytes();
      s.requests = c.runner->requests();
      tl.add(s);
    }
  };

  auto quiescent = [&] {
    if (frames_done < n_frames || joined < clients.size()) return false;
    for (const SimClient& c : clients)
      if (c.outstanding) return false;
    return server.streams().all_drained();
  };

  result.quiescent = quiescent();
  while (!result.quiescent && !events.empty()) {
    const Event e = events.top();
    if (e.t > deadline) break;
    events.pop();
    now = e.t;
    switch (e.type) {
      case kFrame: {
        const std::vector<BlockPosition> p_mc = server.frame(e.index, e.t);
        for (SimClient& c : clients)
          if (c.joined) c.report.expected.insert(p_mc.begin(), p_mc.end());
        ++frames_done;
        break;
      }
      case kDelivery: {
        SimClient& c = clients[e.index];
        ServedPackage& pkg = c.in_flight;
        if (c.runner->mode() == ClientMode::Exploration)
          c.runner->on_package(protocol::BlockPackage{pkg.positions, pkg.blocks});
        else
          c.runner->on_positions(pkg.positions);
        for (double q : pkg.enqueued_at) {
          c.report.delays.push_back(e.t - q);
          c.report.max_delay = std::max(c.report.max_delay, e.t - q);
        }
        c.in_flight = {};
        c.outstanding = false;
        break;
      }
      case kClient: {
        SimClient& c = clients[e.index];
        if (e.join) {
          const std::vector<BlockPosition> base = server.join(c.report.id, e.t);
          c.report.expected.insert(base.begin(), base.end());
          c.report.baseline_blocks = base.size();
          c.joined = true;
          ++joined;
          sample_all(e.t);
        }
        if (!c.outstanding) {
          const bool payload = c.runner->mode() == ClientMode::Exploration;
          c.in_flight = server.serve(c.report.id, c.report.group.package_size, payload);
          const double bits = 8.0 * static_cast<double>(protocol::block_package_bytes(c.in_flight.positions.size()));
          double t = e.t;
          if (spec.server_bandwidth_bits_s > 0.0) {
            t = std::max(t, server_link_free) + bits / spec.server_bandwidth_bits_s;
            server_link_free = t;
          }
          if (c.bandwidth > 0.0) {
            t = std::max(t, c.link_free) + bits / c.bandwidth;
            c.link_free = t;
          }
          c.outstanding = true;
          push(t, kDelivery, e.index);
        }
        ++c.tick;
        push(c.report.group.join_time + static_cast<double>(c.tick) / c.report.group.request_rate, kClient, e.index);
        break;
      }
      case kSample:
        sample_all(e.t);
        ++sample_k;
        push(static_cast<double>(sample_k) / spec.sample_rate, kSample, 0);
        break;
    }
    result.quiescent = quiescent();
  }

  result.end_time = result.quiescent ? now : std::max(now, deadline);
  sample_all(result.end_time);
  result.frames = frames_done;
  result.final_stats = server.stats();

  double bw_sum = 0.0;
  for (SimClient& c : clients) {
    if (!result.quiescent) c.report.max_delay = kInf;
    c.report.bytes = c.runner->bytes();
    c.report.requests = c.runner->requests();
    c.report.received = c.runner->received();
    if (c.runner->mode() == ClientMode::Exploration) c.report.mesh = c.runner->take_mesh();
    result.max_delay = std::max(result.max_delay, c.report.max_delay);
    bw_sum += c.report.mean_bandwidth_bits_s(result.end_time);
    result.clients.push_back(std::move(c.report));
  }
  if (!result.quiescent) result.max_delay = kInf;
  result.mean_bandwidth_bits_s = clients.empty() ? 0.0 : bw_sum / static_cast<double>(clients.size());
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, Variant variant) {
  spec.validate();
  StreamTrace trace;
  LiveServer server(spec, variant, trace);
  ExperimentResult r = simulate(spec, variant, server);
  r.server = server.take_server();
  r.model = server.take_model();
  r.trace = std::move(trace);
  if (spec.scene) {
    const TriangleMesh mesh = extract_triangles(r.server->mc(), spec.grid);
    r.mesh_triangles = mesh.triangle_count();
    r.mesh_rms = mesh_rms_error(mesh, spec.scene->scene);
  }
  return r;
}

ExperimentResult replay_experiment(const ExperimentSpec& spec, Variant variant, const StreamTrace& trace) {
  spec.validate();
  ReplayServer server(trace);
  return simulate(spec, variant, server);
}

ScalabilityResult find_max_clients(const ExperimentSpec& spec, Variant variant, const StreamTrace& trace, int limit) {
  if (spec.clients.empty()) throw ArgumentError("scalability needs a client group");
  if (limit < 1) throw ArgumentError("client limit must be positive");
  ScalabilityResult out;
  out.variant = variant;
  ExperimentSpec probe = spec;
  probe.clients = {spec.clients.front()};
  probe.clients.front().mode = ClientMode::Benchmark;
  auto passes = [&](int n) {
    probe.clients.front().count = n;
    const double d = replay_experiment(probe, variant, trace).max_delay;
    out.probes[n] = d;
    return d <= spec.delay_threshold;
  };

  int good = 0, bad = 0;
  for (int n = 1;; n *= 2) {
    if (n >= limit) {
      if (passes(limit)) {
        out.max_clients = limit;
        return out;
      }
      bad = limit;
      break;
    }
    if (!passes(n)) {
      bad = n;
      break;
    }
    good = n;
  }
  while (bad - good > 1) {
    const int mid = good + (bad - good) / 2;
    (passes(mid) ? good : bad) = mid;
  }
  out.max_clients = good;
  return out;
}

ScalabilityResult find_max_clients(const ExperimentSpec& spec, Variant variant, int limit) {
  ExperimentSpec recording = spec;
  // Record the trace with one client per group so every join time gets a baseline.
  for (ClientGroup& g : recording.clients) {
    g.count = 1;
    g.mode = ClientMode::Benchmark;
  }
  const ExperimentResult live = run_experiment(recording, variant);
  return find_max_clients(spec, variant, live.trace, limit);
}

std::string summary_row(const ExperimentResult& r) {
  const ClientReport* first = r.clients.empty() ? nullptr : &r.clients.front();
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%zu,%g,%zu,%s,%.3f,%zu,%zu,%zu", std::string(variant_name(r.variant)).c_str(),
                r.clients.size(), first ? first->group.request_rate : 0.0, first ? first->group.package_size : 0,
                std::isinf(r.max_delay) ? "inf" : std::to_string(r.max_delay).c_str(), r.mean_bandwidth_bits_s,
                r.final_stats.mc_blocks, r.final_stats.update_set, r.final_stats.tsdf_blocks);
  return buf;
}

void write_experiment_outputs(const std::filesystem::path& dir, const std::vector<const ExperimentResult*>& results) {
  std::filesystem::create_directories(dir);
  std::ofstream summary(dir / "summary.csv");
  if (!summary) throw std::runtime_error("cannot write " + (dir / "summary.csv").string());
  summary << kSummaryCsvHeader << '\n';
  for (const ExperimentResult* r : results) {
    summary << summary_row(*r) << '\n';
    for (const ClientReport& c : r->clients) {
      const std::string name = std::string(variant_name(r->variant)) + "_client" + std::to_string(c.id) + ".csv";
      c.timeline.write_csv(dir / name);
    }
  }
  if (!summary) throw std::runtime_error("failed writing summary.csv");
}

}  // namespace voxstream
