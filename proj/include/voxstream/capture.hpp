#pragma once

#include "voxstream/fusion.hpp"
#include "voxstream/protocol.hpp"
#include "voxstream/server.hpp"

#include <string>
#include <string_view>

namespace voxstream {

/// System variants of the ablation: base, one filter each, and all three.
enum class Variant { Base, Ddf, Vbad, Mcvbp, Ours };

Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);

struct VariantFlags {
  bool depth_filter = false;  // discontinuity filter on the raw depth
  bool alloc_downsample = false;  // allocate from every c_a-th pixel instead of every pixel
  bool prune_blocks = false;  // server-side MC block pruning with c_w
};

VariantFlags variant_flags(Variant v);

struct PipelineConfig {
  GridConfig grid;
  FusionConfig fusion;
  DepthFilterConfig filter;
  bool depth_filter = true;

  void validate() const;
};

PipelineConfig pipeline_config(Variant v, const GridConfig& grid = {});
ServerConfig server_config(Variant v, const GridConfig& grid = {});

/// Reconstruction process: filters, allocates and fuses each frame and
/// packages the touched blocks for upload.
class ReconstructionPipeline {
 public:
  ReconstructionPipeline(const PipelineConfig& cfg, const Intrinsics& k);

  protocol::FrameBatch process(const DepthFrame& frame);

  const TsdfModel& model() const { return model_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  PipelineConfig cfg_;
  Intrinsics k_;
  TsdfModel model_;
};

}  // namespace voxstream
