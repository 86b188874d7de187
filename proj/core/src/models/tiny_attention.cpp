#include <cmath>
#include <limits>
#include <memory>

#include "models/toy_network.hpp"

namespace patchforge {

namespace {

using nn::FeatureMap;
using nn::Matrix;

constexpr int kPatch = ToyNetwork::kStride;

// Non-overlapping 8x8 patch embedding, fixed 2-D sinusoidal positions,
// two pre-norm transformer blocks, per-token linear classifier, bilinear
// upsampling of the token logits back to pixels.
class TinyAttention final : public ToyNetwork {
 public:
  static constexpr int kHeads = 2;
  static constexpr int kBlocks = 2;

  struct Block {
    nn::LayerNorm ln1, ln2;
    nn::SelfAttention attn;
    nn::Linear fc1, fc2;
  };

  TinyAttention(int num_classes, int d) : dim_(d), embed_(3 * kPatch * kPatch, d), final_ln_(d), classifier_(d, num_classes) {
    for (int b = 0; b < kBlocks; ++b) {
      blocks_.push_back({nn::LayerNorm(d), nn::LayerNorm(d), nn::SelfAttention(d, kHeads), nn::Linear(d, 2 * d),
                         nn::Linear(2 * d, d)});
    }
  }

  void init(Rng& rng) {
    embed_.init(rng);
    for (auto& b : blocks_) {
      b.attn.init(rng);
      b.fc1.init(rng);
      b.fc2.init(rng, 0.5);
    }
    classifier_.init(rng);
  }

  std::unique_ptr<ToyNetwork> clone() const override { return std::make_unique<TinyAttention>(*this); }

  std::unique_ptr<ToyNetwork> zeros_like() const override {
    auto z = std::make_unique<TinyAttention>(*this);
    z->visit([](Matrix& m) { m.setZero(); });
    return z;
  }

  void visit(const std::function<void(Matrix&)>& fn) override {
    auto lin = [&fn](nn::Linear& l) {
      fn(l.weight);
      fn(l.bias);
    };
    auto norm = [&fn](nn::LayerNorm& l) {
      fn(l.gamma);
      fn(l.beta);
    };
    lin(embed_);
    for (auto& b : blocks_) {
      norm(b.ln1);
      lin(b.attn.query);
      lin(b.attn.key);
      lin(b.attn.value);
      lin(b.attn.output);
      norm(b.ln2);
      lin(b.fc1);
      lin(b.fc2);
    }
    norm(final_ln_);
    lin(classifier_);
  }

  struct BlockCache {
    nn::LayerNormCache ln1, ln2;
    nn::AttentionCache attn;
    Matrix h2, z1;  // fc1 input and pre-activation
    Matrix a1;      // fc2 input
  };

  struct AttnCache final : Cache {
    Matrix patches;
    std::vector<BlockCache> blocks;
    nn::LayerNormCache final_ln;
    Matrix final_tokens;
    int h = 0, w = 0, gh = 0, gw = 0;
  };

  FeatureMap forward(const FeatureMap& x, std::unique_ptr<Cache>* cache_out) const override {
    auto cache = std::make_unique<AttnCache>();
    AttnCache& c = *cache;
    c.h = x.height;
    c.w = x.width;
    c.gh = x.height / kPatch;
    c.gw = x.width / kPatch;

    c.patches = patchify(x, c.gh, c.gw);
    Matrix t = nn::linear_forward(embed_, c.patches) + positions(c.gh, c.gw);
    c.blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const Block& b = blocks_[i];
      BlockCache& bc = c.blocks[i];
      t += nn::attention_forward(b.attn, nn::layernorm_forward(b.ln1, t, &bc.ln1), &bc.attn);
      bc.h2 = nn::layernorm_forward(b.ln2, t, &bc.ln2);
      bc.z1 = nn::linear_forward(b.fc1, bc.h2);
      bc.a1 = nn::silu_forward(bc.z1);
      t += nn::linear_forward(b.fc2, bc.a1);
    }
    c.final_tokens = nn::layernorm_forward(final_ln_, t, &c.final_ln);
    FeatureMap low{static_cast<int>(classifier_.out_features), c.gh, c.gw};
    low.data = nn::linear_forward(classifier_, c.final_tokens);
    const nn::BilinearResize up(c.gh, c.gw, c.h, c.w);
    FeatureMap logits = up.forward(low);
    if (cache_out) *cache_out = std::move(cache);
    return logits;
  }

  FeatureMap backward(const Cache& base, const FeatureMap& dlogits, ToyNetwork* grads_base,
                      bool need_input_grad) const override {
    const auto& c = static_cast<const AttnCache&>(base);
    auto* g = static_cast<TinyAttention*>(grads_base);

    const nn::BilinearResize up(c.gh, c.gw, c.h, c.w);
    const FeatureMap dlow = up.backward(dlogits);
    Matrix dt = nn::linear_backward(classifier_, c.final_tokens, dlow.data, g ? &g->classifier_ : nullptr);
    dt = nn::layernorm_backward(final_ln_, c.final_ln, dt, g ? &g->final_ln_ : nullptr);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      const Block& b = blocks_[i];
      Block* gb = g ? &g->blocks_[i] : nullptr;
      const BlockCache& bc = c.blocks[i];
      // t += fc2(silu(fc1(ln2(t))))
      Matrix da1 = nn::linear_backward(b.fc2, bc.a1, dt, gb ? &gb->fc2 : nullptr);
      Matrix dz1 = nn::silu_backward(bc.z1, da1);
      Matrix dh2 = nn::linear_backward(b.fc1, bc.h2, dz1, gb ? &gb->fc1 : nullptr);
      dt += nn::layernorm_backward(b.ln2, bc.ln2, dh2, gb ? &gb->ln2 : nullptr);
      // t += attn(ln1(t))
      Matrix dh1 = nn::attention_backward(b.attn, bc.attn, dt, gb ? &gb->attn : nullptr);
      dt += nn::layernorm_backward(b.ln1, bc.ln1, dh1, gb ? &gb->ln1 : nullptr);
    }
    const Matrix dp = nn::linear_backward(embed_, c.patches, dt, g ? &g->embed_ : nullptr);
    if (!need_input_grad) return {};
    return unpatchify(dp, c.h, c.w, c.gh, c.gw);
  }

  std::size_t receptive_radius(int) const override { return std::numeric_limits<std::size_t>::max(); }

 private:
  // Column per token; row = (py*kPatch + px)*3 + channel.
  static Matrix patchify(const FeatureMap& x, int gh, int gw) {
    Matrix p(3 * kPatch * kPatch, gh * gw);
    for (int ty = 0; ty < gh; ++ty) {
      for (int tx = 0; tx < gw; ++tx) {
        const int token = ty * gw + tx;
        for (int py = 0; py < kPatch; ++py) {
          for (int px = 0; px < kPatch; ++px) {
            const int pix = (ty * kPatch + py) * x.width + tx * kPatch + px;
            p.block((py * kPatch + px) * 3, token, 3, 1) = x.data.col(pix);
          }
        }
      }
    }
    return p;
  }

  static FeatureMap unpatchify(const Matrix& dp, int h, int w, int gh, int gw) {
    FeatureMap dx(3, h, w);
    for (int ty = 0; ty < gh; ++ty) {
      for (int tx = 0; tx < gw; ++tx) {
        const int token = ty * gw + tx;
        for (int py = 0; py < kPatch; ++py) {
          for (int px = 0; px < kPatch; ++px) {
            const int pix = (ty * kPatch + py) * w + tx * kPatch + px;
            dx.data.col(pix) = dp.block((py * kPatch + px) * 3, token, 3, 1);
          }
        }
      }
    }
    return dx;
  }

  Matrix positions(int gh, int gw) const {
    Matrix pe(dim_, gh * gw);
    const int quarter = dim_ / 4;
    for (int ty = 0; ty < gh; ++ty) {
      for (int tx = 0; tx < gw; ++tx) {
        const int token = ty * gw + tx;
        for (int i = 0; i < quarter; ++i) {
          const double freq = std::pow(100.0, -static_cast<double>(i) / quarter);
          pe(4 * i + 0, token) = std::sin(ty * freq);
          pe(4 * i + 1, token) = std::cos(ty * freq);
          pe(4 * i + 2, token) = std::sin(tx * freq);
          pe(4 * i + 3, token) = std::cos(tx * freq);
        }
      }
    }
    return pe;
  }

  int dim_;
  nn::Linear embed_;
  std::vector<Block> blocks_;
  nn::LayerNorm final_ln_;
  nn::Linear classifier_;
};

}  // namespace

std::unique_ptr<ToyNetwork> make_tiny_attention(int num_classes, int width, Rng& rng) {
  auto net = std::make_unique<TinyAttention>(num_classes, width);
  net->init(rng);
  return net;
}

}  // namespace patchforge
