#ifndef PATCHFORGE_NN_LAYERS_HPP_
#define PATCHFORGE_NN_LAYERS_HPP_

// Minimal layer kernels for the toy models. Each layer has an explicit
// forward that fills a cache and a backward that consumes it; parameter
// gradients accumulate into a zero-initialised twin of the layer.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "patchforge/rng.hpp"

namespace patchforge::nn {

using Matrix = Eigen::MatrixXd;

// channels x (height*width); pixel index = y * width + x.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(Matrix::Zero(c, h * w)) {}
  int pixels() const { return height * width; }
};

struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  Matrix weight;  // out x (kernel*kernel*in), column = (ky*kernel + kx)*in + ci
  Matrix bias;    // out x 1

  Conv2d() = default;
  Conv2d(int in, int out, int k, int s, int p);
  int out_extent(int in) const { return (in + 2 * padding - kernel) / stride + 1; }
  void init(Rng& rng);
  // Interval of input indices feeding output indices [lo,hi] along one axis.
  std::pair<int, int> input_span(int lo, int hi, int in_extent) const;
};

struct ConvCache {
  Matrix cols;
  int in_h = 0;
  int in_w = 0;
  int out_h = 0;
  int out_w = 0;
};

FeatureMap conv_forward(const Conv2d& conv, const FeatureMap& x, ConvCache* cache);
// Returns the input gradient (empty map when !need_input_grad).
FeatureMap conv_backward(const Conv2d& conv, const ConvCache& cache, const FeatureMap& dy, Conv2d* grad,
                         bool need_input_grad);

// Token-wise affine map: tokens are columns.
struct Linear {
  int in_features = 0;
  int out_features = 0;
  Matrix weight;  // out x in
  Matrix bias;    // out x 1

  Linear() = default;
  Linear(int in, int out);
  void init(Rng& rng, double gain = 1.0);
};

Matrix linear_forward(const Linear& layer, const Matrix& x);
Matrix linear_backward(const Linear& layer, const Matrix& x, const Matrix& dy, Linear* grad);

// SiLU: x * sigmoid(x).
Matrix silu_forward(const Matrix& x);
Matrix silu_backward(const Matrix& x, const Matrix& dy);

struct LayerNorm {
  int features = 0;
  Matrix gamma;
  Matrix beta;
  double eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(int d);
};

struct LayerNormCache {
  Matrix xhat;
  Eigen::RowVectorXd inv_std;
};

Matrix layernorm_forward(const LayerNorm& ln, const Matrix& x, LayerNormCache* cache);
Matrix layernorm_backward(const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy, LayerNorm* grad);

struct SelfAttention {
  int dim = 0;
  int heads = 1;
  Linear query, key, value, output;

  SelfAttention() = default;
  SelfAttention(int d, int h);
  void init(Rng& rng);
};

struct AttentionCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, queries x keys
  Matrix context;
};

Matrix attention_forward(const SelfAttention& attn, const Matrix& x, AttentionCache* cache);
Matrix attention_backward(const SelfAttention& attn, const AttentionCache& cache, const Matrix& dy,
                          SelfAttention* grad);

// Bilinear resize with half-pixel centres (align_corners = false). Linear in
// its input, so backward is the transposed scatter.
class BilinearResize {
 public:
  BilinearResize(int in_h, int in_w, int out_h, int out_w);
  FeatureMap forward(const FeatureMap& x) const;
  FeatureMap backward(const FeatureMap& dy) const;
  // Interval of input indices feeding output indices [lo,hi] along an axis.
  std::pair<int, int> input_span_rows(int lo, int hi) const;
  std::pair<int, int> input_span_cols(int lo, int hi) const;

 private:
  struct Tap {
    int lo;
    int hi;
    double frac;
  };
  static std::vector<Tap> make_taps(int in, int out);
  int in_h_, in_w_, out_h_, out_w_;
  std::vector<Tap> rows_;
  std::vector<Tap> cols_;
};

}  // namespace patchforge::nn

#endif  // PATCHFORGE_NN_LAYERS_HPP_
