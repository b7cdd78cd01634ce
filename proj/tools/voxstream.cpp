#include "voxstream/capture.hpp"
#include "voxstream/client.hpp"
#include "voxstream/datagen.hpp"
#include "voxstream/experiment.hpp"
#include "voxstream/network.hpp"
#include "voxstream/ply.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <pthread.h>

using namespace voxstream;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

std::string default_address() {
  const char* env = std::getenv("VOXSTREAM_ADDR");
  return env && *env ? env : "127.0.0.1:7878";
}

int cmd_gen_scene(const std::string& spec_path, int frames, const std::string& out) {
  SceneSpec spec = load_scene_spec(spec_path);
  if (frames > 0) spec.frames = frames;
  std::vector<DepthFrame> rendered;
  for (SyntheticFrame& f : spec.render()) rendered.push_back(std::move(f.frame));
  save_dataset(out, spec.intrinsics, rendered);
  std::printf("wrote %zu frames (%dx%d) to %s\n", rendered.size(), spec.intrinsics.width, spec.intrinsics.height,
              out.c_str());
  return 0;
}

int cmd_capture(const std::string& dataset, const std::string& server, const std::string& variant, double rate) {
  DatasetReader reader(dataset);
  const CaptureStats st = run_capture(reader, pipeline_config(parse_variant(variant)), Endpoint::parse(server), rate);
  std::printf("sent %zu frames, %zu blocks, %zu bytes\n", st.frames, st.blocks_sent, st.bytes_sent);
  return 0;
}

int cmd_serve(const std::string& listen, const std::string& variant, bool once) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  NetworkServer server(server_config(parse_variant(variant)), Endpoint::parse(listen));
  server.start();
  std::printf("listening on port %u\n", server.port());
  std::fflush(stdout);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  if (once) {
    server.wait_until_done();
    pthread_kill(waiter.native_handle(), SIGTERM);
  }
  waiter.join();
  server.stop();
  const ServerStats st = server.stats();
  std::printf("tsdf_blocks=%zu mc_blocks=%zu update_set=%zu\n", st.tsdf_blocks, st.mc_blocks, st.update_set);
  return 0;
}

int cmd_client(const std::string& server, const std::string& mode, ClientConfig cfg, ClientId id,
               const std::string& out_csv, const std::string& out_ply) {
  if (mode == "bench") cfg.mode = ClientMode::Benchmark;
  else if (mode == "explore") cfg.mode = ClientMode::Exploration;
  else throw ArgumentError("mode must be bench or explore");
  if (!out_ply.empty() && cfg.mode != ClientMode::Exploration) throw ArgumentError("--out-ply needs --mode explore");
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  RemoteServer source(Endpoint::parse(server), id);
  ClientResult r = run_client(cfg, source, {}, &g_stop);
  source.close();
  r.timeline.write_csv(out_csv);
  if (!out_ply.empty()) export_ply(*r.mesh, out_ply);
  std::printf("received %zu blocks, %llu bytes%s\n", r.received.size(),
              static_cast<unsigned long long>(r.timeline.back().bytes),
              r.timeline.truncated() ? " (connection lost)" : "");
  return r.timeline.truncated() ? 2 : 0;
}

std::vector<Variant> pick_variants(const ExperimentSpec& spec, const std::vector<std::string>& names) {
  if (names.empty()) return spec.variants;
  std::vector<Variant> out;
  for (const std::string& n : names) out.push_back(parse_variant(n));
  return out;
}

int cmd_experiment(const std::string& spec_path, const std::string& out_dir, const std::vector<std::string>& names) {
  const ExperimentSpec spec = load_experiment_spec(spec_path);
  std::vector<ExperimentResult> results;
  for (Variant v : pick_variants(spec, names)) results.push_back(run_experiment(spec, v));
  std::vector<const ExperimentResult*> ptrs;
  std::cout << kSummaryCsvHeader << '\n';
  for (const ExperimentResult& r : results) {
    ptrs.push_back(&r);
    std::cout << summary_row(r) << '\n';
  }
  write_experiment_outputs(out_dir, ptrs);
  return 0;
}

int cmd_scalability(const std::string& spec_path, const std::vector<std::string>& names, int limit) {
  const ExperimentSpec spec = load_experiment_spec(spec_path);
  std::cout << "variant,max_clients\n";
  for (Variant v : pick_variants(spec, names)) {
    const ScalabilityResult r = find_max_clients(spec, v, limit);
    std::cout << variant_name(v) << ',' << r.max_clients << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse voxel block reconstruction, streaming server and clients"};
  app.require_subcommand(1);

  std::string spec, out, dataset, server = default_address(), listen = default_address(), variant = "ours";
  int frames = 0;
  auto* gen = app.add_subcommand("gen-scene", "Render a synthetic scene spec into a VXDS dataset");
  gen->add_option("--spec", spec, "Scene spec JSON")->required();
  gen->add_option("--frames", frames, "Override the frame count");
  gen->add_option("--out", out, "Output VXDS file")->required();

  double rate = 30.0;
  auto* cap = app.add_subcommand("capture", "Reconstruct a dataset and upload TSDF blocks to a server");
  cap->add_option("--dataset", dataset, "Input VXDS file")->required();
  cap->add_option("--server", server, "Server address host:port (default $VOXSTREAM_ADDR)");
  cap->add_option("--variant", variant, "base, ddf, vbad, mcvbp or ours");
  cap->add_option("--rate", rate, "Frames per second, 0 for unpaced");

  bool once = false;
  auto* srv = app.add_subcommand("serve", "Run the streaming server");
  srv->add_option("--listen", listen, "Listen address host:port (default $VOXSTREAM_ADDR)");
  srv->add_option("--variant", variant, "base, ddf, vbad, mcvbp or ours");
  srv->add_flag("--once", once, "Exit after the capture has ended and all clients have left");

  std::string mode = "bench", out_csv, out_ply;
  ClientConfig ccfg;
  ClientId id = 1;
  auto* cli = app.add_subcommand("client", "Run a benchmark or exploration client");
  cli->add_option("--server", server, "Server address host:port (default $VOXSTREAM_ADDR)");
  cli->add_option("--mode", mode, "bench or explore");
  cli->add_option("--rate", ccfg.request_rate, "Requests per second");
  cli->add_option("--package", ccfg.package_size, "Maximum blocks per request");
  cli->add_option("--id", id, "Client id");
  cli->add_option("--duration", ccfg.duration, "Seconds to run, 0 until idle");
  cli->add_option("--idle-timeout", ccfg.idle_timeout, "Seconds without new blocks before stopping");
  cli->add_option("--out-csv", out_csv, "Metrics CSV")->required();
  cli->add_option("--out-ply", out_ply, "Mesh PLY (explore mode)");

  std::vector<std::string> variants;
  auto* exp = app.add_subcommand("experiment", "Run an in-process virtual-clock experiment");
  exp->add_option("--spec", spec, "Experiment spec JSON")->required();
  exp->add_option("--out-dir", out, "Directory for summary.csv and client CSVs")->required();
  exp->add_option("--variant", variants, "Override the spec's variants");

  int limit = 4096;
  auto* sca = app.add_subcommand("scalability", "Search the largest client count within the delay threshold");
  sca->add_option("--spec", spec, "Experiment spec JSON")->required();
  sca->add_option("--variant", variants, "Override the spec's variants");
  sca->add_option("--limit", limit, "Upper bound on the client count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_scene(spec, frames, out);
    if (*cap) return cmd_capture(dataset, server, variant, rate);
    if (*srv) return cmd_serve(listen, variant, once);
    if (*cli) return cmd_client(server, mode, ccfg, id, out_csv, out_ply);
    if (*exp) return cmd_experiment(spec, out, variants);
    if (*sca) return cmd_scalability(spec, variants, limit);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "voxstream: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
