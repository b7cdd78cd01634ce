#include "voxstream/capture.hpp"

#include "voxstream/errors.hpp"

#include <string>

namespace voxstream {

Variant parse_variant(std::string_view name) {
  if (name == "base") return Variant::Base;
  if (name == "ddf") return Variant::Ddf;
  if (name == "vbad") return Variant::Vbad;
  if (name == "mcvbp") return Variant::Mcvbp;
  if (name == "ours") return Variant::Ours;
  throw ArgumentError("unknown variant '" + std::string(name) + "' (expected base, ddf, vbad, mcvbp or ours)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::Ddf: return "ddf";
    case Variant::Vbad: return "vbad";
    case Variant::Mcvbp: return "mcvbp";
    case Variant::Ours: return "ours";
  }
  return "base";
}

VariantFlags variant_flags(Variant v) {
  switch (v) {
    case Variant::Base: return {false, false, false};
    case Variant::Ddf: return {true, false, false};
    case Variant::Vbad: return {false, true, false};
    case Variant::Mcvbp: return {false, false, true};
    case Variant::Ours: return {true, true, true};
  }
  return {};
}

void PipelineConfig::validate() const {
  grid.validate();
  fusion.validate();
  if (depth_filter) filter.validate();
}

PipelineConfig pipeline_config(Variant v, const GridConfig& grid) {
  const VariantFlags f = variant_flags(v);
  PipelineConfig cfg;
  cfg.grid = grid;
  cfg.depth_filter = f.depth_filter;
  cfg.fusion.c_a = f.alloc_downsample ? 4 : 1;
  return cfg;
}

ServerConfig server_config(Variant v, const GridConfig& grid) {
  ServerConfig cfg;
  cfg.grid = grid;
  cfg.prune_blocks = variant_flags(v).prune_blocks;
  return cfg;
}

ReconstructionPipeline::ReconstructionPipeline(const PipelineConfig& cfg, const Intrinsics& k)
    : cfg_(cfg), k_(k), model_(cfg.grid) {
  cfg_.validate();
  k_.validate();
}

protocol::FrameBatch ReconstructionPipeline::process(const DepthFrame& frame) {
  if (frame.width != k_.width || frame.height != k_.height)
    throw ArgumentError("frame size does not match the camera intrinsics");
  const DepthFrame filtered = cfg_.depth_filter ? filter_depth(frame, cfg_.filter) : frame;
  allocate_blocks(model_, filtered, k_, cfg_.fusion);
  integrate_frame(model_, filtered, k_, cfg_.fusion);

  protocol::FrameBatch batch;
  batch.positions = model_.drain_pending();
  batch.blocks.reserve(batch.positions.size());
  for (const BlockPosition& p : batch.positions) batch.blocks.push_back(*model_.blocks().find(p));
  return batch;
}

}  // namespace voxstream
