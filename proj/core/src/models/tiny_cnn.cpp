#include <algorithm>
#include <limits>
#include <memory>

#include "models/toy_network.hpp"

namespace patchforge {

namespace {

using nn::Conv2d;
using nn::ConvCache;
using nn::FeatureMap;
using nn::Matrix;

// 4-stage encoder down to 1/8, 2-stage decoder with additive skips from the
// 1/4 and 1/2 encoder stages, 1x1 classifier at 1/2 and bilinear upsampling.
class TinyCnn final : public ToyNetwork {
 public:
  TinyCnn(int num_classes, int w)
      : enc1_(3, w, 3, 1, 1),
        enc2_(w, w, 3, 2, 1),
        enc3_(w, 2 * w, 3, 2, 1),
        enc4a_(2 * w, 4 * w, 3, 2, 1),
        enc4b_(4 * w, 4 * w, 3, 1, 1),
        dec1_(4 * w, 2 * w, 3, 1, 1),
        dec2_(2 * w, w, 3, 1, 1),
        head_(w, num_classes, 1, 1, 0) {}

  void init(Rng& rng) {
    visit_layers([&rng](Conv2d& c) { c.init(rng); });
  }

  std::unique_ptr<ToyNetwork> clone() const override { return std::make_unique<TinyCnn>(*this); }

  std::unique_ptr<ToyNetwork> zeros_like() const override {
    auto z = std::make_unique<TinyCnn>(*this);
    z->visit([](Matrix& m) { m.setZero(); });
    return z;
  }

  void visit(const std::function<void(Matrix&)>& fn) override {
    visit_layers([&fn](Conv2d& c) {
      fn(c.weight);
      fn(c.bias);
    });
  }

  struct CnnCache final : Cache {
    ConvCache c1, c2, c3, c4a, c4b, d1, d2, head;
    Matrix z1, z2, z3, z4a, z4b, zd1, zd2;  // pre-activations
    int h = 0, w = 0;
  };

  FeatureMap forward(const FeatureMap& x, std::unique_ptr<Cache>* cache_out) const override {
    auto cache = std::make_unique<CnnCache>();
    CnnCache& c = *cache;
    c.h = x.height;
    c.w = x.width;

    auto act = [](const FeatureMap& pre, Matrix& keep) {
      FeatureMap out{pre.channels, pre.height, pre.width};
      keep = pre.data;
      out.data = nn::silu_forward(pre.data);
      return out;
    };

    const FeatureMap a1 = act(nn::conv_forward(enc1_, x, &c.c1), c.z1);
    const FeatureMap a2 = act(nn::conv_forward(enc2_, a1, &c.c2), c.z2);
    const FeatureMap a3 = act(nn::conv_forward(enc3_, a2, &c.c3), c.z3);
    const FeatureMap a4 = act(nn::conv_forward(enc4a_, a3, &c.c4a), c.z4a);
    const FeatureMap a5 = act(nn::conv_forward(enc4b_, a4, &c.c4b), c.z4b);

    const nn::BilinearResize up1(a5.height, a5.width, a3.height, a3.width);
    FeatureMap d1 = act(nn::conv_forward(dec1_, up1.forward(a5), &c.d1), c.zd1);
    d1.data += a3.data;

    const nn::BilinearResize up2(d1.height, d1.width, a2.height, a2.width);
    FeatureMap d2 = act(nn::conv_forward(dec2_, up2.forward(d1), &c.d2), c.zd2);
    d2.data += a2.data;

    const FeatureMap low = nn::conv_forward(head_, d2, &c.head);
    const nn::BilinearResize up3(low.height, low.width, x.height, x.width);
    FeatureMap logits = up3.forward(low);
    if (cache_out) *cache_out = std::move(cache);
    return logits;
  }

  FeatureMap backward(const Cache& base, const FeatureMap& dlogits, ToyNetwork* grads_base,
                      bool need_input_grad) const override {
    const auto& c = static_cast<const CnnCache&>(base);
    auto* g = static_cast<TinyCnn*>(grads_base);
    auto grad_of = [g](Conv2d TinyCnn::*member) -> Conv2d* { return g ? &(g->*member) : nullptr; };
    auto dact = [](const Matrix& pre, FeatureMap d) {
      d.data = nn::silu_backward(pre, d.data);
      return d;
    };

    const nn::BilinearResize up3(c.head.out_h, c.head.out_w, c.h, c.w);
    FeatureMap dd2 = nn::conv_backward(head_, c.head, up3.backward(dlogits), grad_of(&TinyCnn::head_), true);

    // d2 = silu(dec2(up2(d1))) + a2
    FeatureMap da2 = dd2;
    const nn::BilinearResize up2(c.d1.out_h, c.d1.out_w, c.c2.out_h, c.c2.out_w);
    FeatureMap dd1 =
        up2.backward(nn::conv_backward(dec2_, c.d2, dact(c.zd2, dd2), grad_of(&TinyCnn::dec2_), true));

    // d1 = silu(dec1(up1(a5))) + a3
    FeatureMap da3 = dd1;
    const nn::BilinearResize up1(c.c4b.out_h, c.c4b.out_w, c.c3.out_h, c.c3.out_w);
    const FeatureMap da5 =
        up1.backward(nn::conv_backward(dec1_, c.d1, dact(c.zd1, dd1), grad_of(&TinyCnn::dec1_), true));

    const FeatureMap da4 = nn::conv_backward(enc4b_, c.c4b, dact(c.z4b, da5), grad_of(&TinyCnn::enc4b_), true);
    da3.data += nn::conv_backward(enc4a_, c.c4a, dact(c.z4a, da4), grad_of(&TinyCnn::enc4a_), true).data;
    da2.data += nn::conv_backward(enc3_, c.c3, dact(c.z3, da3), grad_of(&TinyCnn::enc3_), true).data;
    const FeatureMap da1 = nn::conv_backward(enc2_, c.c2, dact(c.z2, da2), grad_of(&TinyCnn::enc2_), true);
    return nn::conv_backward(enc1_, c.c1, dact(c.z1, da1), grad_of(&TinyCnn::enc1_), need_input_grad);
  }

  std::size_t receptive_radius(int extent) const override {
    // Exact 1-D dependency intervals propagated from every output index back
    // to the input, including both skip paths.
    const int e1 = extent;
    const int e2 = enc2_.out_extent(e1);
    const int e4 = enc3_.out_extent(e2);
    const int e8 = enc4a_.out_extent(e4);
    const nn::BilinearResize up1(e8, e8, e4, e4);
    const nn::BilinearResize up2(e4, e4, e2, e2);
    const nn::BilinearResize up3(e2, e2, e1, e1);
    using Span = std::pair<int, int>;
    auto hull = [](Span a, Span b) { return Span{std::min(a.first, b.first), std::max(a.second, b.second)}; };
    std::size_t radius = 0;
    for (int y = 0; y < e1; ++y) {
      const Span d2 = head_.input_span(up3.input_span_rows(y, y).first, up3.input_span_rows(y, y).second, e2);
      const Span u2 = dec2_.input_span(d2.first, d2.second, e2);
      const Span d1 = up2.input_span_rows(u2.first, u2.second);
      const Span u1 = dec1_.input_span(d1.first, d1.second, e4);
      const Span a5 = up1.input_span_rows(u1.first, u1.second);
      const Span a4 = enc4b_.input_span(a5.first, a5.second, e8);
      const Span a3 = hull(enc4a_.input_span(a4.first, a4.second, e4), d1);
      const Span a2 = hull(enc3_.input_span(a3.first, a3.second, e2), d2);
      const Span a1 = enc2_.input_span(a2.first, a2.second, e1);
      const Span in = enc1_.input_span(a1.first, a1.second, e1);
      radius = std::max<std::size_t>(radius, static_cast<std::size_t>(std::max(y - in.first, in.second - y)));
    }
    return radius;
  }

 private:
  template <class F>
  void visit_layers(F&& f) {
    for (Conv2d* c : {&enc1_, &enc2_, &enc3_, &enc4a_, &enc4b_, &dec1_, &dec2_, &head_}) f(*c);
  }

  Conv2d enc1_, enc2_, enc3_, enc4a_, enc4b_, dec1_, dec2_, head_;
};

}  // namespace

std::unique_ptr<ToyNetwork> make_tiny_cnn(int num_classes, int width, Rng& rng) {
  auto net = std::make_unique<TinyCnn>(num_classes, width);
  net->init(rng);
  return net;
}

}  // namespace patchforge
