#pragma once

#include <string>
#include <vector>

#include "pulseseg/nn.hpp"

namespace pulseseg {

struct BackboneConfig {
  std::vector<int> channels = {32, 32, 64, 64, 128, 128};
  std::vector<int> strides = {2, 1, 2, 1, 1, 1};
  std::vector<int> dilations = {1, 1, 1, 1, 2, 2};
  int in_channels = 3;
};

// Small dilated CNN feature extractor: conv/bn/relu blocks, overall
// stride 4 with the default config, dilation instead of further
// downsampling in the last two blocks.
class Backbone {
 public:
  Backbone() = default;
  explicit Backbone(const BackboneConfig& cfg) : cfg_(cfg) {
    int in = cfg.in_channels;
    for (size_t i = 0; i < cfg.channels.size(); ++i) {
      const int dil = cfg.dilations[i];
      convs_.emplace_back(in, cfg.channels[i], 3, cfg.strides[i], dil, dil);
      bns_.emplace_back(cfg.channels[i]);
      in = cfg.channels[i];
    }
  }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init_he(rng);
  }

  int stride() const {
    int s = 1;
    for (int v : cfg_.strides) s *= v;
    return s;
  }
  int out_channels() const { return cfg_.channels.back(); }
  const BackboneConfig& config() const { return cfg_; }

  Tensor forward(const Tensor& image, bool training) {
    if (!image.all_finite()) throw std::runtime_error("Backbone: non-finite input image");
    acts_.clear();
    Tensor x = image;
    for (size_t i = 0; i < convs_.size(); ++i) {
      x = convs_[i].forward(x);
      x = bns_[i].forward(x, training);
      relu_inplace(x);
      acts_.push_back(x);  // post-relu activation, reused as the relu mask
    }
    return x;
  }

  // Backward through all blocks; accumulates parameter gradients and
  // returns the gradient w.r.t. the input image.
  Tensor backward(const Tensor& gfeature) {
    Tensor g = gfeature;
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
      relu_backward_inplace(g, acts_[static_cast<size_t>(i)]);
      g = bns_[static_cast<size_t>(i)].backward(g);
      g = convs_[static_cast<size_t>(i)].backward(g);
    }
    return g;
  }

  std::vector<ParamRef> params(const std::string& prefix) {
    std::vector<ParamRef> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
      auto cp = convs_[i].params(prefix + ".conv" + std::to_string(i));
      out.insert(out.end(), cp.begin(), cp.end());
      auto bp = bns_[i].params(prefix + ".bn" + std::to_string(i));
      out.insert(out.end(), bp.begin(), bp.end());
    }
    return out;
  }

  std::vector<Tensor*> buffers() {
    std::vector<Tensor*> out;
    for (auto& bn : bns_) {
      auto b = bn.buffers();
      out.insert(out.end(), b.begin(), b.end());
    }
    return out;
  }

 private:
  BackboneConfig cfg_;
  std::vector<Conv2d> convs_;
  std::vector<BatchNorm2d> bns_;
  std::vector<Tensor> acts_;
};

}  // namespace pulseseg
