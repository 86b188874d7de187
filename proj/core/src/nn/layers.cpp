#include "nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace patchforge::nn {

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in, int out, int k, int s, int p)
    : in_channels(in),
      out_channels(out),
      kernel(k),
      stride(s),
      padding(p),
      weight(Matrix::Zero(out, k * k * in)),
      bias(Matrix::Zero(out, 1)) {}

void Conv2d::init(Rng& rng) {
  const double scale = std::sqrt(2.0 / (kernel * kernel * in_channels));
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = scale * rng.normal();
  bias.setZero();
}

std::pair<int, int> Conv2d::input_span(int lo, int hi, int in_extent) const {
  return {std::max(0, lo * stride - padding), std::min(in_extent - 1, hi * stride - padding + kernel - 1)};
}

FeatureMap conv_forward(const Conv2d& conv, const FeatureMap& x, ConvCache* cache) {
  const int oh = conv.out_extent(x.height);
  const int ow = conv.out_extent(x.width);
  const int k = conv.kernel;
  const int in = conv.in_channels;
  ConvCache local;
  ConvCache& c = cache ? *cache : local;
  c.in_h = x.height;
  c.in_w = x.width;
  c.out_h = oh;
  c.out_w = ow;

  FeatureMap y(conv.out_channels, oh, ow);
  if (k == 1 && conv.stride == 1 && conv.padding == 0) {
    c.cols = x.data;
  } else {
    c.cols.setZero(k * k * in, oh * ow);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int p = oy * ow + ox;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * conv.stride - conv.padding + ky;
          if (iy < 0 || iy >= x.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * conv.stride - conv.padding + kx;
            if (ix < 0 || ix >= x.width) continue;
            c.cols.block((ky * k + kx) * in, p, in, 1) = x.data.col(iy * x.width + ix);
          }
        }
      }
    }
  }
  y.data.noalias() = conv.weight * c.cols;
  y.data.colwise() += conv.bias.col(0);
  return y;
}

FeatureMap conv_backward(const Conv2d& conv, const ConvCache& cache, const FeatureMap& dy, Conv2d* grad,
                         bool need_input_grad) {
  if (grad) {
    grad->weight.noalias() += dy.data * cache.cols.transpose();
    grad->bias.col(0) += dy.data.rowwise().sum();
  }
  if (!need_input_grad) return {};
  const int k = conv.kernel;
  const int in = conv.in_channels;
  FeatureMap dx(in, cache.in_h, cache.in_w);
  if (k == 1 && conv.stride == 1 && conv.padding == 0) {
    dx.data.noalias() = conv.weight.transpose() * dy.data;
    return dx;
  }
  const Matrix dcols = conv.weight.transpose() * dy.data;
  for (int oy = 0; oy < cache.out_h; ++oy) {
    for (int ox = 0; ox < cache.out_w; ++ox) {
      const int p = oy * cache.out_w + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * conv.stride - conv.padding + ky;
        if (iy < 0 || iy >= cache.in_h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * conv.stride - conv.padding + kx;
          if (ix < 0 || ix >= cache.in_w) continue;
          dx.data.col(iy * cache.in_w + ix) += dcols.block((ky * k + kx) * in, p, in, 1);
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in, int out)
    : in_features(in), out_features(out), weight(Matrix::Zero(out, in)), bias(Matrix::Zero(out, 1)) {}

void Linear::init(Rng& rng, double gain) {
  const double scale = gain / std::sqrt(static_cast<double>(in_features));
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = scale * rng.normal();
  bias.setZero();
}

Matrix linear_forward(const Linear& layer, const Matrix& x) {
  Matrix y = layer.weight * x;
  y.colwise() += layer.bias.col(0);
  return y;
}

Matrix linear_backward(const Linear& layer, const Matrix& x, const Matrix& dy, Linear* grad) {
  if (grad) {
    grad->weight.noalias() += dy * x.transpose();
    grad->bias.col(0) += dy.rowwise().sum();
  }
  return layer.weight.transpose() * dy;
}

// ---------------------------------------------------------------------------
// SiLU

Matrix silu_forward(const Matrix& x) {
  return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Matrix silu_backward(const Matrix& x, const Matrix& dy) {
  return x.binaryExpr(dy, [](double v, double g) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return g * s * (1.0 + v * (1.0 - s));
  });
}

// ---------------------------------------------------------------------------
// LayerNorm (over rows, per column)

LayerNorm::LayerNorm(int d) : features(d), gamma(Matrix::Ones(d, 1)), beta(Matrix::Zero(d, 1)) {}

Matrix layernorm_forward(const LayerNorm& ln, const Matrix& x, LayerNormCache* cache) {
  const double d = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mean = x.colwise().sum() / d;
  Matrix centered = x.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / d;
  const Eigen::RowVectorXd inv_std = (var.array() + ln.eps).rsqrt();
  Matrix xhat = centered.array().rowwise() * inv_std.array();
  Matrix y = (xhat.array().colwise() * ln.gamma.col(0).array()).matrix();
  y.colwise() += ln.beta.col(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return y;
}

Matrix layernorm_backward(const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy, LayerNorm* grad) {
  if (grad) {
    grad->gamma.col(0) += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
    grad->beta.col(0) += dy.rowwise().sum();
  }
  const double d = static_cast<double>(dy.rows());
  const Matrix dxhat = (dy.array().colwise() * ln.gamma.col(0).array()).matrix();
  const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum();
  Matrix dx = (d * dxhat.array()).matrix();
  dx.rowwise() -= sum_dxhat;
  dx -= (cache.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
  dx = (dx.array().rowwise() * (cache.inv_std.array() / d)).matrix();
  return dx;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention

SelfAttention::SelfAttention(int d, int h) : dim(d), heads(h), query(d, d), key(d, d), value(d, d), output(d, d) {}

void SelfAttention::init(Rng& rng) {
  query.init(rng);
  key.init(rng);
  value.init(rng);
  output.init(rng, 0.5);
}

Matrix attention_forward(const SelfAttention& attn, const Matrix& x, AttentionCache* cache) {
  const int n = static_cast<int>(x.cols());
  const int dh = attn.dim / attn.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.input = x;
  c.q = linear_forward(attn.query, x);
  c.k = linear_forward(attn.key, x);
  c.v = linear_forward(attn.value, x);
  c.context.setZero(attn.dim, n);
  c.probs.assign(static_cast<std::size_t>(attn.heads), Matrix());
  for (int h = 0; h < attn.heads; ++h) {
    Matrix scores = scale * (c.q.middleRows(h * dh, dh).transpose() * c.k.middleRows(h * dh, dh));
    // Row-wise softmax over keys.
    const Eigen::VectorXd peak = scores.rowwise().maxCoeff();
    scores = (scores.colwise() - peak).array().exp().matrix();
    const Eigen::VectorXd denom = scores.rowwise().sum();
    scores = (scores.array().colwise() / denom.array()).matrix();
    c.context.middleRows(h * dh, dh).noalias() = c.v.middleRows(h * dh, dh) * scores.transpose();
    c.probs[static_cast<std::size_t>(h)] = std::move(scores);
  }
  return linear_forward(attn.output, c.context);
}

Matrix attention_backward(const SelfAttention& attn, const AttentionCache& c, const Matrix& dy, SelfAttention* grad) {
  const int dh = attn.dim / attn.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix dcontext = linear_backward(attn.output, c.context, dy, grad ? &grad->output : nullptr);
  Matrix dq = Matrix::Zero(c.q.rows(), c.q.cols());
  Matrix dk = Matrix::Zero(c.k.rows(), c.k.cols());
  Matrix dv = Matrix::Zero(c.v.rows(), c.v.cols());
  for (int h = 0; h < attn.heads; ++h) {
    const Matrix& probs = c.probs[static_cast<std::size_t>(h)];
    const auto doh = dcontext.middleRows(h * dh, dh);
    dv.middleRows(h * dh, dh).noalias() = doh * probs;
    const Matrix dprobs = doh.transpose() * c.v.middleRows(h * dh, dh);
    const Eigen::VectorXd row_dot = (dprobs.array() * probs.array()).rowwise().sum();
    const Matrix dscores = (probs.array() * (dprobs.colwise() - row_dot).array()).matrix();
    dq.middleRows(h * dh, dh).noalias() = scale * (c.k.middleRows(h * dh, dh) * dscores.transpose());
    dk.middleRows(h * dh, dh).noalias() = scale * (c.q.middleRows(h * dh, dh) * dscores);
  }
  Matrix dx = linear_backward(attn.query, c.input, dq, grad ? &grad->query : nullptr);
  dx += linear_backward(attn.key, c.input, dk, grad ? &grad->key : nullptr);
  dx += linear_backward(attn.value, c.input, dv, grad ? &grad->value : nullptr);
  return dx;
}

// ---------------------------------------------------------------------------
// Bilinear resize

std::vector<BilinearResize::Tap> BilinearResize::make_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int i = 0; i < out; ++i) {
    const double src = std::max(0.0, (i + 0.5) * ratio - 0.5);
    const int lo = std::min(static_cast<int>(src), in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, in - 1), src - lo};
  }
  return taps;
}

BilinearResize::BilinearResize(int in_h, int in_w, int out_h, int out_w)
    : in_h_(in_h), in_w_(in_w), out_h_(out_h), out_w_(out_w), rows_(make_taps(in_h, out_h)),
      cols_(make_taps(in_w, out_w)) {}

FeatureMap BilinearResize::forward(const FeatureMap& x) const {
  FeatureMap y(x.channels, out_h_, out_w_);
  for (int oy = 0; oy < out_h_; ++oy) {
    const Tap& r = rows_[static_cast<std::size_t>(oy)];
    for (int ox = 0; ox < out_w_; ++ox) {
      const Tap& c = cols_[static_cast<std::size_t>(ox)];
      auto out = y.data.col(oy * out_w_ + ox);
      out = (1 - r.frac) * ((1 - c.frac) * x.data.col(r.lo * in_w_ + c.lo) + c.frac * x.data.col(r.lo * in_w_ + c.hi)) +
            r.frac * ((1 - c.frac) * x.data.col(r.hi * in_w_ + c.lo) + c.frac * x.data.col(r.hi * in_w_ + c.hi));
    }
  }
  return y;
}

FeatureMap BilinearResize::backward(const FeatureMap& dy) const {
  FeatureMap dx(dy.channels, in_h_, in_w_);
  for (int oy = 0; oy < out_h_; ++oy) {
    const Tap& r = rows_[static_cast<std::size_t>(oy)];
    for (int ox = 0; ox < out_w_; ++ox) {
      const Tap& c = cols_[static_cast<std::size_t>(ox)];
      const auto g = dy.data.col(oy * out_w_ + ox);
      dx.data.col(r.lo * in_w_ + c.lo) += (1 - r.frac) * (1 - c.frac) * g;
      dx.data.col(r.lo * in_w_ + c.hi) += (1 - r.frac) * c.frac * g;
      dx.data.col(r.hi * in_w_ + c.lo) += r.frac * (1 - c.frac) * g;
      dx.data.col(r.hi * in_w_ + c.hi) += r.frac * c.frac * g;
    }
  }
  return dx;
}

std::pair<int, int> BilinearResize::input_span_rows(int lo, int hi) const {
  return {rows_[static_cast<std::size_t>(lo)].lo, rows_[static_cast<std::size_t>(hi)].hi};
}

std::pair<int, int> BilinearResize::input_span_cols(int lo, int hi) const {
  return {cols_[static_cast<std::size_t>(lo)].lo, cols_[static_cast<std::size_t>(hi)].hi};
}

}  // namespace patchforge::nn
