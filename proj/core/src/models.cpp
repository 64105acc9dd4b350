#include "rohm/models.hpp"

#include <cmath>
#include <fstream>

namespace rohm {

namespace {

int group_count(int channels) {
  for (int g : {8, 4, 2, 1})
    if (channels % g == 0) return g;
  return 1;
}

Tensor sinusoidal_embedding(const Tensor& t, int dim) {
  auto tf = t.to(torch::kFloat32).unsqueeze(-1);  // [B,1]
  const int half = dim / 2;
  auto freqs = torch::exp(torch::arange(half, torch::kFloat32) *
                          (-std::log(10000.0) / std::max(half - 1, 1)));
  auto args = tf * freqs;  // [B,half]
  return torch::cat({torch::sin(args), torch::cos(args)}, -1);
}

// Pads the time axis of [B,C,N] to a multiple of `m` (zeros on the right).
Tensor pad_time(const Tensor& x, int m) {
  const int64_t n = x.size(-1);
  const int64_t rem = n % m;
  if (rem == 0) return x;
  return torch::constant_pad_nd(x, {0, m - rem});
}

}  // namespace

// ---------------------------------------------------------------- StepEmbedding

StepEmbeddingImpl::StepEmbeddingImpl(int dim) : dim_(dim) {
  fc1 = register_module("fc1", torch::nn::Linear(dim, dim));
  fc2 = register_module("fc2", torch::nn::Linear(dim, dim));
}

Tensor StepEmbeddingImpl::forward(const Tensor& t) {
  return fc2(torch::silu(fc1(sinusoidal_embedding(t, dim_))));
}

// ------------------------------------------------------------------- ConvBlock

ConvBlockImpl::ConvBlockImpl(int cin, int cout, int kernel, int temb_dim) {
  const int pad = kernel / 2;
  conv1 = register_module(
      "conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(cin, cout, kernel).padding(pad)));
  conv2 = register_module(
      "conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(cout, cout, kernel).padding(pad)));
  norm1 = register_module("norm1", torch::nn::GroupNorm(group_count(cout), cout));
  norm2 = register_module("norm2", torch::nn::GroupNorm(group_count(cout), cout));
  temb_proj = register_module("temb_proj", torch::nn::Linear(temb_dim, cout));
  has_skip_ = cin != cout;
  if (has_skip_)
    skip = register_module("skip", torch::nn::Conv1d(torch::nn::Conv1dOptions(cin, cout, 1)));
}

Tensor ConvBlockImpl::forward(const Tensor& x, const Tensor& temb) {
  auto h = torch::silu(norm1(conv1(x)));
  h = h + temb_proj(torch::silu(temb)).unsqueeze(-1);
  h = torch::silu(norm2(conv2(h)));
  return h + (has_skip_ ? skip(x) : x);
}

// ----------------------------------------------------------------- CondEncoder

CondEncoderImpl::CondEncoderImpl(const TrajNetConfig& cfg) : temb_dim_(cfg.temb_dim) {
  const int L = static_cast<int>(cfg.channels.size());
  in_proj = register_module("in_proj",
                            torch::nn::Conv1d(torch::nn::Conv1dOptions(
                                cfg.in_channels, cfg.channels[0], cfg.kernel)
                                                  .padding(cfg.kernel / 2)));
  blocks = register_module("blocks", torch::nn::ModuleList());
  downs = register_module("downs", torch::nn::ModuleList());
  int prev = cfg.channels[0];
  for (int l = 0; l < L; ++l) {
    blocks->push_back(ConvBlock(prev, cfg.channels[l], cfg.kernel, cfg.temb_dim));
    prev = cfg.channels[l];
    if (l + 1 < L)
      downs->push_back(torch::nn::Conv1d(
          torch::nn::Conv1dOptions(prev, prev, 3).stride(2).padding(1)));
  }
}

std::vector<Tensor> CondEncoderImpl::forward(const Tensor& cond) {
  auto temb = torch::zeros({cond.size(0), temb_dim_}, cond.options());
  std::vector<Tensor> feats;
  auto h = in_proj(cond);
  for (size_t l = 0; l < blocks->size(); ++l) {
    h = blocks->at<ConvBlockImpl>(l).forward(h, temb);
    feats.push_back(h);
    if (l < downs->size()) h = downs->at<torch::nn::Conv1dImpl>(l).forward(h);
  }
  return feats;
}

// ----------------------------------------------------------------- TrajEncoder

TrajEncoderImpl::TrajEncoderImpl(const TrajNetConfig& cfg) {
  const int L = static_cast<int>(cfg.channels.size());
  in_proj = register_module("in_proj",
                            torch::nn::Conv1d(torch::nn::Conv1dOptions(
                                cfg.in_channels, cfg.channels[0], cfg.kernel)
                                                  .padding(cfg.kernel / 2)));
  blocks = register_module("blocks", torch::nn::ModuleList());
  downs = register_module("downs", torch::nn::ModuleList());
  int prev = cfg.channels[0];
  for (int l = 0; l < L; ++l) {
    // Conditioning features are concatenated at each level.
    blocks->push_back(ConvBlock(prev + cfg.channels[l], cfg.channels[l], cfg.kernel, cfg.temb_dim));
    prev = cfg.channels[l];
    if (l + 1 < L)
      downs->push_back(torch::nn::Conv1d(
          torch::nn::Conv1dOptions(prev, prev, 3).stride(2).padding(1)));
  }
}

std::vector<Tensor> TrajEncoderImpl::forward(const Tensor& x, const std::vector<Tensor>& cond_feats,
                                             const Tensor& temb) {
  std::vector<Tensor> feats;
  auto h = in_proj(x);
  for (size_t l = 0; l < blocks->size(); ++l) {
    h = blocks->at<ConvBlockImpl>(l).forward(torch::cat({h, cond_feats[l]}, 1), temb);
    feats.push_back(h);
    if (l < downs->size()) h = downs->at<torch::nn::Conv1dImpl>(l).forward(h);
  }
  return feats;
}

// --------------------------------------------------------------------- TrajNet

TrajNetImpl::TrajNetImpl(TrajNetConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.channels.size() < 2) throw ConfigError("trajnet: need at least 2 levels");
  temb_ = register_module("temb", StepEmbedding(cfg_.temb_dim));
  cond_encoder_ = register_module("cond_encoder", CondEncoder(cfg_));
  encoder_ = register_module("encoder", TrajEncoder(cfg_));
  const int L = static_cast<int>(cfg_.channels.size());
  mid_ = register_module("mid",
                         ConvBlock(cfg_.channels[L - 1], cfg_.channels[L - 1], cfg_.kernel,
                                   cfg_.temb_dim));
  ups = register_module("ups", torch::nn::ModuleList());
  dec_blocks = register_module("dec_blocks", torch::nn::ModuleList());
  for (int l = L - 1; l >= 1; --l) {
    ups->push_back(torch::nn::ConvTranspose1d(
        torch::nn::ConvTranspose1dOptions(cfg_.channels[l], cfg_.channels[l - 1], 4)
            .stride(2)
            .padding(1)));
    dec_blocks->push_back(
        ConvBlock(2 * cfg_.channels[l - 1], cfg_.channels[l - 1], cfg_.kernel, cfg_.temb_dim));
  }
  out_proj = register_module("out_proj",
                             torch::nn::Conv1d(torch::nn::Conv1dOptions(
                                 cfg_.channels[0], cfg_.in_channels, cfg_.kernel)
                                                   .padding(cfg_.kernel / 2)));
}

Tensor TrajNetImpl::forward(const Tensor& r_t, const Tensor& t, const Tensor& cond,
                            const std::vector<Tensor>* control) {
  if (r_t.size(-1) != cfg_.in_channels || cond.size(-1) != cfg_.in_channels)
    throw Error("trajnet: expected [B,N," + std::to_string(cfg_.in_channels) + "] inputs");
  const int64_t n = r_t.size(1);
  const int L = static_cast<int>(cfg_.channels.size());
  const int m = 1 << (L - 1);
  auto x = pad_time(r_t.transpose(1, 2), m);
  auto c = pad_time(cond.transpose(1, 2), m);
  auto temb = temb_(t);
  auto cond_feats = cond_encoder_(c);
  auto enc = encoder_(x, cond_feats, temb);
  if (control) {
    if (control->size() != enc.size()) throw Error("trajnet: control feature count mismatch");
    for (size_t i = 0; i < enc.size(); ++i) enc[i] = enc[i] + (*control)[i];
  }
  auto h = mid_(enc.back(), temb);
  for (size_t i = 0; i < ups->size(); ++i) {
    h = ups->at<torch::nn::ConvTranspose1dImpl>(i).forward(h);
    auto& skip = enc[enc.size() - 2 - i];
    h = dec_blocks->at<ConvBlockImpl>(i).forward(torch::cat({h, skip}, 1), temb);
  }
  auto out = out_proj(h).transpose(1, 2);
  return out.slice(1, 0, n);
}

// ----------------------------------------------------------------- TrajControl

TrajControlImpl::TrajControlImpl(const TrajNetConfig& cfg) : cfg_(cfg) {
  pose_proj = register_module(
      "pose_proj", torch::nn::Conv1d(torch::nn::Conv1dOptions(pose::kDim, cfg_.in_channels, 1)));
  temb_ = register_module("temb", StepEmbedding(cfg_.temb_dim));
  cond_encoder_ = register_module("cond_encoder", CondEncoder(cfg_));
  encoder_ = register_module("encoder", TrajEncoder(cfg_));
  zero_convs = register_module("zero_convs", torch::nn::ModuleList());
  for (int ch : cfg_.channels) {
    auto zc = torch::nn::Conv1d(torch::nn::Conv1dOptions(ch, ch, 1));
    zero_convs->push_back(zc);
  }
  for (size_t i = 0; i < zero_convs->size(); ++i) {
    auto& zc = zero_convs->at<torch::nn::Conv1dImpl>(i);
    torch::NoGradGuard g;
    zc.weight.zero_();
    zc.bias.zero_();
  }
}

std::vector<Tensor> TrajControlImpl::forward(const Tensor& pose_ctrl, const Tensor& t) {
  if (pose_ctrl.size(-1) != pose::kDim) throw Error("trajcontrol: expected [B,N,266] control");
  const int L = static_cast<int>(cfg_.channels.size());
  const int m = 1 << (L - 1);
  auto p = pad_time(pose_ctrl.transpose(1, 2), m);
  auto x = pose_proj(p);
  auto temb = temb_(t);
  auto cond_feats = cond_encoder_(x);
  auto enc = encoder_(x, cond_feats, temb);
  std::vector<Tensor> out;
  for (size_t i = 0; i < enc.size(); ++i)
    out.push_back(zero_convs->at<torch::nn::Conv1dImpl>(i).forward(enc[i]));
  return out;
}

void TrajControlImpl::init_from_base(TrajNetImpl& base) {
  copy_module_state(*base.encoder().get(), *encoder_.get());
  copy_module_state(*base.cond_encoder().get(), *cond_encoder_.get());
  copy_module_state(*base.step_embedding().get(), *temb_.get());
}

TrajControl attach_trajcontrol(TrajNet& base, bool allow_untrained) {
  if (!base->trained && !allow_untrained)
    throw Error("attach_trajcontrol: base TrajNet is not trained");
  TrajControl ctl(base->config());
  ctl->init_from_base(*base);
  for (auto& p : base->parameters()) p.set_requires_grad(false);
  return ctl;
}

// -------------------------------------------------------- TransformerDenoiser

TransformerDenoiserImpl::TransformerDenoiserImpl(TransformerConfig cfg) : cfg_(std::move(cfg)) {
  input_proj = register_module("input_proj", torch::nn::Linear(cfg_.input_dim, cfg_.latent));
  cond_proj = register_module("cond_proj", torch::nn::Linear(cfg_.cond_dim, cfg_.latent));
  out_proj = register_module("out_proj", torch::nn::Linear(cfg_.latent, cfg_.output_dim));
  temb_ = register_module("temb", StepEmbedding(cfg_.latent));
  segment_embed_ = register_parameter("segment_embed", torch::zeros({2, cfg_.latent}));
  auto layer_opts = torch::nn::TransformerEncoderLayerOptions(cfg_.latent, cfg_.heads)
                        .dim_feedforward(cfg_.ff)
                        .dropout(0.0)
                        .activation(torch::kGELU);
  encoder_ = register_module(
      "encoder", torch::nn::TransformerEncoder(torch::nn::TransformerEncoderLayer(layer_opts),
                                               cfg_.layers));
}

Tensor TransformerDenoiserImpl::forward(const Tensor& x, const Tensor& t, const Tensor& cond) {
  if (x.size(-1) != cfg_.input_dim || cond.size(-1) != cfg_.cond_dim)
    throw Error("transformer denoiser: input/cond width mismatch");
  const int64_t n = x.size(1);
  // The condition is fused into each frame token so the network never has to
  // learn the frame correspondence across two token streams.
  auto tok_in = input_proj(x) + cond_proj(cond) + segment_embed_[0];
  auto tok_t = (temb_(t) + segment_embed_[1]).unsqueeze(1);  // [B,1,d]
  auto seq = torch::cat({tok_t, tok_in}, 1);                 // [B,1+N,d]
  auto pos = sinusoidal_embedding(torch::arange(seq.size(1), torch::kFloat32), cfg_.latent);
  seq = seq + pos.unsqueeze(0);
  // libtorch transformers take [S,B,E].
  auto out = encoder_(seq.transpose(0, 1)).transpose(0, 1);
  return out_proj(out.slice(1, 1, 1 + n));
}

// --------------------------------------------------------------------- PoseNet

PoseNetImpl::PoseNetImpl(TransformerConfig cfg) {
  cfg.input_dim = traj::kCompact + pose::kDim;
  cfg.cond_dim = traj::kCompact + pose::kDim;
  cfg.output_dim = pose::kDim;
  core_ = register_module("core", TransformerDenoiser(cfg));
}

Tensor PoseNetImpl::forward(const Tensor& r0_hat, const Tensor& p_t, const Tensor& t,
                            const Tensor& cond_pose) {
  auto x = torch::cat({r0_hat, p_t}, -1);
  auto cond = torch::cat({r0_hat, cond_pose}, -1);
  return core_(x, t, cond);
}

// ----------------------------------------------------------------------- MDM++

TransformerConfig MdmppImpl::mdmpp_default_config() {
  TransformerConfig cfg;
  cfg.input_dim = traj::kCompact + pose::kDim;
  cfg.cond_dim = traj::kCompact + pose::kDim;
  cfg.output_dim = traj::kCompact + pose::kDim;
  return cfg;
}

MdmppImpl::MdmppImpl(TransformerConfig cfg) {
  cfg.output_dim = cfg.input_dim;
  core_ = register_module("core", TransformerDenoiser(cfg));
}

Tensor MdmppImpl::forward(const Tensor& x_t, const Tensor& t, const Tensor& cond) {
  return core_(x_t, t, cond);
}

// ------------------------------------------------------------------- utilities

uint64_t parameter_checksum(const torch::nn::Module& module) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& p : module.parameters()) {
    auto c = p.detach().to(torch::kFloat64).contiguous();
    const auto* bytes = reinterpret_cast<const uint8_t*>(c.data_ptr<double>());
    for (int64_t i = 0; i < c.numel() * 8; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

void copy_module_state(const torch::nn::Module& src, torch::nn::Module& dst) {
  torch::NoGradGuard guard;
  auto src_params = src.named_parameters();
  for (auto& item : dst.named_parameters()) {
    auto* s = src_params.find(item.key());
    if (!s) throw Error("copy_module_state: missing parameter " + item.key());
    item.value().copy_(*s);
  }
  auto src_buffers = src.named_buffers();
  for (auto& item : dst.named_buffers()) {
    auto* s = src_buffers.find(item.key());
    if (!s) throw Error("copy_module_state: missing buffer " + item.key());
    item.value().copy_(*s);
  }
}

void save_checkpoint(torch::nn::Module& module, const CheckpointMeta& meta,
                     const std::filesystem::path& path_base) {
  auto pt = path_base;
  pt += ".pt";
  torch::serialize::OutputArchive archive;
  module.save(archive);
  archive.save_to(pt.string());
  nlohmann::json j;
  j["kind"] = meta.kind;
  j["layout_version"] = meta.layout_version;
  j["schedule_steps"] = meta.schedule_steps;
  j["norm_stats_hash"] = meta.norm_stats_hash;
  j["trained"] = meta.trained;
  j["config"] = meta.config;
  auto js = path_base;
  js += ".json";
  std::ofstream os(js);
  if (!os) throw IoError("checkpoint: cannot write " + js.string());
  os << j.dump(2) << "\n";
}

CheckpointMeta load_checkpoint_meta(const std::filesystem::path& path_base) {
  auto js = path_base;
  js += ".json";
  std::ifstream is(js);
  if (!is) throw IoError("checkpoint: cannot open " + js.string());
  nlohmann::json j;
  is >> j;
  CheckpointMeta meta;
  meta.kind = j.at("kind");
  meta.layout_version = j.at("layout_version");
  meta.schedule_steps = j.at("schedule_steps");
  meta.norm_stats_hash = j.at("norm_stats_hash");
  meta.trained = j.at("trained");
  meta.config = j.at("config");
  return meta;
}

void load_checkpoint_weights(torch::nn::Module& module, const std::filesystem::path& path_base) {
  auto pt = path_base;
  pt += ".pt";
  torch::serialize::InputArchive archive;
  archive.load_from(pt.string());
  module.load(archive);
}

nlohmann::json trajnet_config_to_json(const TrajNetConfig& cfg) {
  return {{"in_channels", cfg.in_channels},
          {"channels", cfg.channels},
          {"kernel", cfg.kernel},
          {"temb_dim", cfg.temb_dim}};
}

TrajNetConfig trajnet_config_from_json(const nlohmann::json& j) {
  TrajNetConfig cfg;
  cfg.in_channels = j.at("in_channels");
  cfg.channels = j.at("channels").get<std::vector<int>>();
  cfg.kernel = j.at("kernel");
  cfg.temb_dim = j.at("temb_dim");
  return cfg;
}

nlohmann::json transformer_config_to_json(const TransformerConfig& cfg) {
  return {{"input_dim", cfg.input_dim}, {"cond_dim", cfg.cond_dim},
          {"output_dim", cfg.output_dim}, {"latent", cfg.latent},
          {"layers", cfg.layers},       {"heads", cfg.heads},
          {"ff", cfg.ff}};
}

TransformerConfig transformer_config_from_json(const nlohmann::json& j) {
  TransformerConfig cfg;
  cfg.input_dim = j.at("input_dim");
  cfg.cond_dim = j.at("cond_dim");
  cfg.output_dim = j.at("output_dim");
  cfg.latent = j.at("latent");
  cfg.layers = j.at("layers");
  cfg.heads = j.at("heads");
  cfg.ff = j.at("ff");
  return cfg;
}

}  // namespace rohm
