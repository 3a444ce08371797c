#pragma once

// Generator (U-Net with optional SPP/CSP bottleneck and SAM/CAM attention)
// and the encoder-only discriminator, both built from a NetworkConfig.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dehaze/config.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/ops.hpp"
#include "dehaze/optim.hpp"
#include "dehaze/rng.hpp"

namespace dehaze {

// Convolution with stride 1 and "same" padding.
template <typename T>
class Conv {
 public:
  Conv() = default;
  Conv(ParameterStore<T>& store, const std::string& name, std::size_t in_c, std::size_t out_c, std::size_t k,
       Rng& rng)
      : weight_(&store.add(name + ".w", Shape{out_c, in_c, k, k})),
        bias_(&store.add(name + ".b", Shape{1, out_c, 1, 1})),
        pad_(k / 2) {
    he_uniform(weight_->value, in_c * k * k, rng);
  }

  Var<T> operator()(Var<T> x) const {
    Tape<T>& tape = *x.tape;
    return conv2d(x, tape.parameter(weight_->value), tape.parameter(bias_->value), 1, pad_);
  }

  Parameter<T>& weight() const { return *weight_; }
  Parameter<T>& bias() const { return *bias_; }
  std::size_t in_channels() const { return weight_->value.shape().c; }
  std::size_t out_channels() const { return weight_->value.shape().n; }

 private:
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
  std::size_t pad_ = 0;
};

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
      : weight_(&store.add(name + ".w", Shape{out, in, 1, 1})), bias_(&store.add(name + ".b", Shape{1, out, 1, 1})) {
    he_uniform(weight_->value, in, rng);
  }

  Var<T> operator()(Var<T> x) const {
    Tape<T>& tape = *x.tape;
    return dense(x, tape.parameter(weight_->value), tape.parameter(bias_->value));
  }

  Parameter<T>& weight() const { return *weight_; }
  Parameter<T>& bias() const { return *bias_; }

 private:
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
};

// concat[x, maxpool_k(x) for k in kernels] followed by a 1x1 fuse back to
// x's channel count. Pools use stride 1 and padding (k-1)/2, so any kernel
// is legal at any extent; windows near the border see only real samples.
template <typename T>
class SppBlock {
 public:
  SppBlock() = default;
  SppBlock(ParameterStore<T>& store, const std::string& name, std::size_t channels, std::vector<std::size_t> kernels,
           Rng& rng)
      : kernels_(std::move(kernels)) {
    for (std::size_t k : kernels_) {
      if (k % 2 == 0) throw ConfigError("spp kernel sizes must be odd, got " + std::to_string(k));
    }
    fuse_ = Conv<T>(store, name + ".fuse", channels * (kernels_.size() + 1), channels, 1, rng);
  }

  Var<T> pre_fuse(Var<T> x) const {
    Var<T> cat = x;
    for (std::size_t k : kernels_) cat = concat_channels(cat, maxpool2d(x, k, 1, (k - 1) / 2));
    return cat;
  }

  Var<T> operator()(Var<T> x) const { return fuse_(pre_fuse(x)); }

  const Conv<T>& fuse() const { return fuse_; }

 private:
  std::vector<std::size_t> kernels_;
  Conv<T> fuse_;
};

// Cross-stage partial block: the first half of the channels passes through two
// 3x3 conv + activation layers, the second half bypasses, then a 1x1 fuse.
template <typename T>
class CspBlock {
 public:
  CspBlock() = default;
  CspBlock(ParameterStore<T>& store, const std::string& name, std::size_t channels, ActivationKind act, Rng& rng)
      : act_(act), half_(channels / 2) {
    if (channels % 2 != 0 || channels == 0) {
      throw ConfigError("csp block needs an even channel count, got " + std::to_string(channels));
    }
    a_ = Conv<T>(store, name + ".a", half_, half_, 3, rng);
    b_ = Conv<T>(store, name + ".b", half_, half_, 3, rng);
    fuse_ = Conv<T>(store, name + ".fuse", channels, channels, 1, rng);
  }

  Var<T> operator()(Var<T> x) const {
    if (x.shape().c != 2 * half_) {
      throw DimensionError("c", "csp block built for " + std::to_string(2 * half_) + " channels, got " +
                                    std::to_string(x.shape().c));
    }
    Var<T> processed = activate(b_(activate(a_(slice_channels(x, 0, half_)), act_)), act_);
    return fuse_(concat_channels(processed, slice_channels(x, half_, half_)));
  }

  const Conv<T>& a() const { return a_; }
  const Conv<T>& b() const { return b_; }
  const Conv<T>& fuse() const { return fuse_; }

 private:
  ActivationKind act_;
  std::size_t half_ = 0;
  Conv<T> a_, b_, fuse_;
};

// sam: sigmoid(conv7x7[mean_c(x), max_c(x)]) gates every pixel.
// cam: sigmoid(mlp(gap(x)) + mlp(gmp(x))) gates every channel; the mlp is
// dense(c -> max(c/4, 1)) + relu + dense(-> c), shared by both branches.
template <typename T>
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(ParameterStore<T>& store, const std::string& name, std::size_t channels, Attention kind, Rng& rng)
      : kind_(kind) {
    if (kind == Attention::sam) {
      spatial_ = Conv<T>(store, name + ".conv", 2, 1, 7, rng);
    } else if (kind == Attention::cam) {
      const std::size_t hidden = std::max<std::size_t>(channels / 4, 1);
      squeeze_ = Dense<T>(store, name + ".fc1", channels, hidden, rng);
      excite_ = Dense<T>(store, name + ".fc2", hidden, channels, rng);
    } else {
      throw ConfigError("attention block needs kind sam or cam");
    }
  }

  Var<T> gate(Var<T> x) const {
    if (kind_ == Attention::sam) {
      return activate(spatial_(concat_channels(channel_mean(x), channel_max(x))), {ActivationKind::sigmoid});
    }
    auto mlp = [&](Var<T> v) { return excite_(activate(squeeze_(v), {ActivationKind::relu})); };
    return activate(add(mlp(global_avg_pool(x)), mlp(global_max_pool(x))), {ActivationKind::sigmoid});
  }

  Var<T> operator()(Var<T> x) const { return mul_gate(x, gate(x)); }

  Attention kind() const { return kind_; }
  const Conv<T>& spatial() const { return spatial_; }
  const Dense<T>& squeeze() const { return squeeze_; }
  const Dense<T>& excite() const { return excite_; }

 private:
  Attention kind_ = Attention::none;
  Conv<T> spatial_;
  Dense<T> squeeze_, excite_;
};

namespace detail {

template <typename T>
std::vector<Conv<T>> conv_stack(ParameterStore<T>& store, const std::string& name, std::size_t in_c,
                                std::size_t out_c, std::size_t count, std::size_t k, Rng& rng) {
  std::vector<Conv<T>> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.emplace_back(store, name + ".conv" + std::to_string(i), i == 0 ? in_c : out_c, out_c, k, rng);
  }
  return out;
}

template <typename T>
Var<T> run_stack(const std::vector<Conv<T>>& convs, Var<T> x, ActivationKind act) {
  for (const auto& c : convs) x = activate(c(x), act);
  return x;
}

}  // namespace detail

template <typename T>
class Generator {
 public:
  explicit Generator(const NetworkConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    auto& s = *store_;
    const std::size_t k = cfg_.stage_kernel, n = cfg_.convs_per_stage();
    std::size_t in_c = cfg_.input_channels;
    for (std::size_t st = 0; st < cfg_.depth; ++st) {
      encoder_.push_back(detail::conv_stack(s, "enc" + std::to_string(st), in_c, cfg_.width(st), n, k, rng));
      in_c = cfg_.width(st);
    }
    const std::size_t wb = cfg_.width(cfg_.depth);
    bottleneck_ = detail::conv_stack(s, "mid", in_c, wb, n, k, rng);
    if (cfg_.bottleneck == Bottleneck::spp) spp_.emplace(s, "spp", wb, cfg_.spp_kernels, rng);
    if (cfg_.bottleneck == Bottleneck::csp) csp_.emplace(s, "csp", wb, cfg_.activation, rng);
    if (cfg_.attention != Attention::none) attention_.emplace(s, "attn", wb, cfg_.attention, rng);
    for (std::size_t st = cfg_.depth; st-- > 0;) {
      const std::string name = "dec" + std::to_string(st);
      up_.insert(up_.begin(), Conv<T>(s, name + ".up", cfg_.width(st + 1), cfg_.width(st), 3, rng));
      decoder_.insert(decoder_.begin(),
                      detail::conv_stack(s, name, 2 * cfg_.width(st), cfg_.width(st), n, k, rng));
    }
    head_ = Conv<T>(s, "head", cfg_.width(0), 3, 3, rng);
  }

  Generator(Generator&&) noexcept = default;
  Generator& operator=(Generator&&) noexcept = default;

  // input: (n, input_channels, H, W) with H, W multiples of 2^depth.
  Var<T> operator()(Var<T> x) const {
    const Shape xs = x.shape();
    if (xs.c != cfg_.input_channels) {
      throw DimensionError("c", "generator expects " + std::to_string(cfg_.input_channels) +
                                    " input channels, got " + std::to_string(xs.c));
    }
    cfg_.check_extent(xs.h, xs.w);
    std::vector<Var<T>> skips;
    for (const auto& stage : encoder_) {
      x = detail::run_stack(stage, x, cfg_.activation);
      skips.push_back(x);
      x = maxpool2d(x, 2, 2);
    }
    x = detail::run_stack(bottleneck_, x, cfg_.activation);
    if (spp_) x = (*spp_)(x);
    if (csp_) x = (*csp_)(x);
    if (attention_) x = (*attention_)(x);
    for (std::size_t st = cfg_.depth; st-- > 0;) {
      x = activate(up_[st](upsample_nearest2x(x)), cfg_.activation);
      x = detail::run_stack(decoder_[st], concat_channels(x, skips[st]), cfg_.activation);
    }
    return activate(head_(x), {ActivationKind::sigmoid});
  }

  const NetworkConfig& config() const { return cfg_; }
  ParameterStore<T>& parameters() { return *store_; }
  const ParameterStore<T>& parameters() const { return *store_; }

  std::vector<std::size_t> stage_widths() const {
    std::vector<std::size_t> w;
    for (const auto& stage : encoder_) w.push_back(stage.back().out_channels());
    return w;
  }

  const std::optional<SppBlock<T>>& spp() const { return spp_; }
  const std::optional<CspBlock<T>>& csp() const { return csp_; }
  const std::optional<AttentionBlock<T>>& attention() const { return attention_; }

 private:
  NetworkConfig cfg_;
  std::unique_ptr<ParameterStore<T>> store_ = std::make_unique<ParameterStore<T>>();
  std::vector<std::vector<Conv<T>>> encoder_;
  std::vector<Conv<T>> bottleneck_;
  std::optional<SppBlock<T>> spp_;
  std::optional<CspBlock<T>> csp_;
  std::optional<AttentionBlock<T>> attention_;
  std::vector<Conv<T>> up_;
  std::vector<std::vector<Conv<T>>> decoder_;
  Conv<T> head_;
};

// The generator's encoder stages, then global average pooling and a dense
// layer to one raw score per batch item.
template <typename T>
class Discriminator {
 public:
  explicit Discriminator(const NetworkConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.core != Core::generative) throw ConfigError("a discriminator needs the generative core");
    Rng rng(seed);
    auto& s = *store_;
    std::size_t in_c = cfg_.discriminator_channels();
    for (std::size_t st = 0; st < cfg_.depth; ++st) {
      encoder_.push_back(detail::conv_stack(s, "disc.enc" + std::to_string(st), in_c, cfg_.width(st),
                                            cfg_.convs_per_stage(), cfg_.stage_kernel, rng));
      in_c = cfg_.width(st);
    }
    score_ = Dense<T>(s, "disc.score", in_c, 1, rng);
  }

  Discriminator(Discriminator&&) noexcept = default;
  Discriminator& operator=(Discriminator&&) noexcept = default;

  Var<T> operator()(Var<T> x) const {
    const Shape xs = x.shape();
    if (xs.c != cfg_.discriminator_channels()) {
      throw DimensionError("c", "discriminator expects " + std::to_string(cfg_.discriminator_channels()) +
                                    " input channels, got " + std::to_string(xs.c));
    }
    cfg_.check_extent(xs.h, xs.w);
    for (const auto& stage : encoder_) x = maxpool2d(detail::run_stack(stage, x, cfg_.activation), 2, 2);
    return score_(global_avg_pool(x));
  }

  std::size_t input_channels() const { return cfg_.discriminator_channels(); }
  const NetworkConfig& config() const { return cfg_; }
  ParameterStore<T>& parameters() { return *store_; }
  const ParameterStore<T>& parameters() const { return *store_; }

  std::vector<std::size_t> stage_widths() const {
    std::vector<std::size_t> w;
    for (const auto& stage : encoder_) w.push_back(stage.back().out_channels());
    return w;
  }

 private:
  NetworkConfig cfg_;
  std::unique_ptr<ParameterStore<T>> store_ = std::make_unique<ParameterStore<T>>();
  std::vector<std::vector<Conv<T>>> encoder_;
  Dense<T> score_;
};

}  // namespace dehaze
