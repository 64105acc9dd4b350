#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "rohm/common.hpp"
#include "rohm/features.hpp"

namespace rohm {

// Sinusoidal step embedding followed by a 2-layer MLP.
class StepEmbeddingImpl : public torch::nn::Module {
 public:
  StepEmbeddingImpl(int dim);
  Tensor forward(const Tensor& t);  // [B] long/float -> [B,dim]
  int dim() const { return dim_; }

 private:
  int dim_;
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(StepEmbedding);

// Residual 1D conv block with step-embedding modulation.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int cin, int cout, int kernel, int temb_dim);
  Tensor forward(const Tensor& x, const Tensor& temb);

 private:
  torch::nn::Conv1d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear temb_proj{nullptr};
  bool has_skip_ = false;
};
TORCH_MODULE(ConvBlock);

struct TrajNetConfig {
  int in_channels = traj::kCompact;
  std::vector<int> channels = {64, 128, 256};  // 3 U-Net levels
  int kernel = 5;
  int temb_dim = 128;
};

// Conditioning encoder: mirrors the U-Net encoder and produces one feature
// map per level, concatenated into the main encoder.
class CondEncoderImpl : public torch::nn::Module {
 public:
  CondEncoderImpl(const TrajNetConfig& cfg);
  std::vector<Tensor> forward(const Tensor& cond);  // [B,C,N] -> per-level feats

 private:
  int temb_dim_ = 0;
  torch::nn::Conv1d in_proj{nullptr};
  torch::nn::ModuleList blocks, downs;
};
TORCH_MODULE(CondEncoder);

// The U-Net encoder half; separable so TrajControl can clone it.
class TrajEncoderImpl : public torch::nn::Module {
 public:
  TrajEncoderImpl(const TrajNetConfig& cfg);
  std::vector<Tensor> forward(const Tensor& x, const std::vector<Tensor>& cond_feats,
                              const Tensor& temb);

 private:
  torch::nn::Conv1d in_proj{nullptr};
  torch::nn::ModuleList blocks, downs;
};
TORCH_MODULE(TrajEncoder);

// Temporal U-Net denoiser over compact trajectory features.
class TrajNetImpl : public torch::nn::Module {
 public:
  explicit TrajNetImpl(TrajNetConfig cfg = {});

  // r_t, cond: [B,N,13]; t: [B] steps; control: optional per-level additive
  // features (from TrajControl), shapes matching the encoder outputs.
  Tensor forward(const Tensor& r_t, const Tensor& t, const Tensor& cond,
                 const std::vector<Tensor>* control = nullptr);

  const TrajNetConfig& config() const { return cfg_; }
  TrajEncoder& encoder() { return encoder_; }
  CondEncoder& cond_encoder() { return cond_encoder_; }
  StepEmbedding& step_embedding() { return temb_; }

  bool trained = false;

 private:
  TrajNetConfig cfg_;
  StepEmbedding temb_{nullptr};
  CondEncoder cond_encoder_{nullptr};
  TrajEncoder encoder_{nullptr};
  ConvBlock mid_{nullptr};
  torch::nn::ModuleList ups, dec_blocks;
  torch::nn::Conv1d out_proj{nullptr};
};
TORCH_MODULE(TrajNet);

// ControlNet-style adapter: a trainable clone of the TrajNet encoder driven
// by local pose, injected into the frozen decoder through zero convolutions.
class TrajControlImpl : public torch::nn::Module {
 public:
  explicit TrajControlImpl(const TrajNetConfig& cfg);

  // pose control input [B,N,266] -> per-level injection features.
  std::vector<Tensor> forward(const Tensor& pose_ctrl, const Tensor& t);

  void init_from_base(TrajNetImpl& base);

 private:
  TrajNetConfig cfg_;
  torch::nn::Conv1d pose_proj{nullptr};
  StepEmbedding temb_{nullptr};
  CondEncoder cond_encoder_{nullptr};
  TrajEncoder encoder_{nullptr};
  torch::nn::ModuleList zero_convs;
};
TORCH_MODULE(TrajControl);

// Clones the encoder of a trained TrajNet, zero-initializes the injection
// convolutions and freezes the base. Pass allow_untrained for tests.
TrajControl attach_trajcontrol(TrajNet& base, bool allow_untrained = false);

struct TransformerConfig {
  int input_dim = traj::kCompact + pose::kDim;
  int cond_dim = traj::kCompact + pose::kDim;
  int output_dim = pose::kDim;
  int latent = 512;
  int layers = 4;
  int heads = 8;
  int ff = 1024;
};

// Transformer encoder over [t-token, cond frame tokens, input frame tokens].
class TransformerDenoiserImpl : public torch::nn::Module {
 public:
  explicit TransformerDenoiserImpl(TransformerConfig cfg = {});

  // x: [B,N,input_dim], t: [B], cond: [B,N,cond_dim] -> [B,N,output_dim]
  Tensor forward(const Tensor& x, const Tensor& t, const Tensor& cond);

  const TransformerConfig& config() const { return cfg_; }
  bool trained = false;

 private:
  TransformerConfig cfg_;
  torch::nn::Linear input_proj{nullptr}, cond_proj{nullptr}, out_proj{nullptr};
  StepEmbedding temb_{nullptr};
  Tensor segment_embed_;  // [2, latent] learned stream tags (frames, step token)
  torch::nn::TransformerEncoder encoder_{nullptr};
};
TORCH_MODULE(TransformerDenoiser);

// PoseNet: denoises local pose; the trajectory block of its output is the
// input trajectory by construction (the model only predicts the pose block).
class PoseNetImpl : public torch::nn::Module {
 public:
  explicit PoseNetImpl(TransformerConfig cfg = {});

  // Returns P0_hat [B,N,266]. The full-state output is cat(r0_hat, P0_hat):
  // the trajectory block is bit-equal to the r0_hat argument.
  Tensor forward(const Tensor& r0_hat, const Tensor& p_t, const Tensor& t,
                 const Tensor& cond_pose);

  TransformerDenoiser& core() { return core_; }
  bool trained = false;

 private:
  TransformerDenoiser core_{nullptr};
};
TORCH_MODULE(PoseNet);

// MDM++ baseline: one transformer concurrently predicts trajectory and pose.
class MdmppImpl : public torch::nn::Module {
 public:
  explicit MdmppImpl(TransformerConfig cfg = mdmpp_default_config());

  // x_t, cond: [B,N,279] -> [B,N,279]
  Tensor forward(const Tensor& x_t, const Tensor& t, const Tensor& cond);

  static TransformerConfig mdmpp_default_config();
  TransformerDenoiser& core() { return core_; }
  bool trained = false;

 private:
  TransformerDenoiser core_{nullptr};
};
TORCH_MODULE(Mdmpp);

// FNV-1a over all parameter bytes; used for freeze contracts.
uint64_t parameter_checksum(const torch::nn::Module& module);

// Copies parameters and buffers by name; shapes must match.
void copy_module_state(const torch::nn::Module& src, torch::nn::Module& dst);

struct CheckpointMeta {
  std::string kind;            // trajnet | posenet | trajcontrol | mdmpp
  int layout_version = 1;      // feature layout
  int schedule_steps = 0;
  uint64_t norm_stats_hash = 0;
  bool trained = false;
  nlohmann::json config;       // architecture dims
};

// path gets ".pt" (weights) and ".json" (sidecar metadata).
void save_checkpoint(torch::nn::Module& module, const CheckpointMeta& meta,
                     const std::filesystem::path& path_base);
CheckpointMeta load_checkpoint_meta(const std::filesystem::path& path_base);
void load_checkpoint_weights(torch::nn::Module& module, const std::filesystem::path& path_base);

nlohmann::json trajnet_config_to_json(const TrajNetConfig& cfg);
TrajNetConfig trajnet_config_from_json(const nlohmann::json& j);
nlohmann::json transformer_config_to_json(const TransformerConfig& cfg);
TransformerConfig transformer_config_from_json(const nlohmann::json& j);

}  // namespace rohm
