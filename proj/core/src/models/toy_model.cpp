#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include "models/toy_network.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/metrics.hpp"
#include "patchforge/model_zoo.hpp"

namespace patchforge {

namespace {

constexpr std::array<double, 3> kMean{0.485, 0.456, 0.406};
constexpr std::array<double, 3> kStd{0.229, 0.224, 0.225};
constexpr char kWeightsMagic[4] = {'P', 'F', 'T', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

int default_width(ToyKind kind) { return kind == ToyKind::kTinyCnn ? 8 : 32; }

std::size_t round_up(std::size_t v) {
  const std::size_t s = ToyNetwork::kStride;
  return (v + s - 1) / s * s;
}

void check_batch(const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) == 0 || images.dim(3) == 0) {
    throw ShapeMismatch("expected an image batch [B,3,H,W], got " + shape_string(images.shape()));
  }
}

// Normalised image b of the batch, zero-padded (i.e. mean colour) to a
// multiple of the network stride.
nn::FeatureMap to_input(const Tensor& images, std::size_t b) {
  const std::size_t h = images.dim(2);
  const std::size_t w = images.dim(3);
  nn::FeatureMap x(3, static_cast<int>(round_up(h)), static_cast<int>(round_up(w)));
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        x.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(y * x.width + xx)) =
            (images(b, c, y, xx) - kMean[c]) / kStd[c];
      }
    }
  }
  return x;
}

void crop_into(const nn::FeatureMap& m, Tensor& out, std::size_t b) {
  const std::size_t channels = out.dim(1), h = out.dim(2), w = out.dim(3);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out(b, c, y, x) = m.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(y * m.width + x));
      }
    }
  }
}

nn::FeatureMap pad_from(const Tensor& t, std::size_t b, int padded_h, int padded_w) {
  const std::size_t channels = t.dim(1), h = t.dim(2), w = t.dim(3);
  nn::FeatureMap m(static_cast<int>(channels), padded_h, padded_w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        m.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(y * padded_w + x)) = t(b, c, y, x);
      }
    }
  }
  return m;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated weights file");
  return v;
}

}  // namespace

void ToyModelConfig::validate() const {
  if (num_classes < 2) throw ConfigError("toy models need at least 2 classes");
  if (width < 0) throw ConfigError("model width must be >= 0");
  if (kind == ToyKind::kTinyAttention && width != 0 && width % 4 != 0) {
    throw ConfigError("tiny_attention width must be a multiple of 4");
  }
}

std::string to_string(ToyKind kind) { return kind == ToyKind::kTinyCnn ? "tiny_cnn" : "tiny_attention"; }

ToyKind parse_toy_kind(const std::string& name) {
  if (name == "tiny_cnn") return ToyKind::kTinyCnn;
  if (name == "tiny_attention") return ToyKind::kTinyAttention;
  throw UnknownModel("unknown toy model '" + name + "'");
}

ToyModel::ToyModel(const ToyModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.width == 0) cfg_.width = default_width(cfg_.kind);
  Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(cfg_.kind) + 1));
  net_ = cfg_.kind == ToyKind::kTinyCnn ? make_tiny_cnn(cfg_.num_classes, cfg_.width, rng)
                                        : make_tiny_attention(cfg_.num_classes, cfg_.width, rng);
}

ToyModel::~ToyModel() = default;

ToyModel::ToyModel(const ToyModel& other)
    : cfg_(other.cfg_), net_(other.net_->clone()), inference_(other.inference_) {}

std::string ToyModel::name() const { return to_string(cfg_.kind); }

Tensor ToyModel::forward(const Tensor& images) const {
  check_batch(images);
  const std::size_t batch = images.dim(0);
  Tensor logits({batch, static_cast<std::size_t>(cfg_.num_classes), images.dim(2), images.dim(3)});
  for (std::size_t b = 0; b < batch; ++b) {
    crop_into(net_->forward(to_input(images, b), nullptr), logits, b);
  }
  return logits;
}

Tensor ToyModel::input_gradient(const Tensor& images, const ScalarLossFn& loss) const {
  if (!inference_) throw StateError("input_gradient requires inference mode");
  check_batch(images);
  const std::size_t batch = images.dim(0);
  const std::size_t h = images.dim(2), w = images.dim(3);
  Tensor logits({batch, static_cast<std::size_t>(cfg_.num_classes), h, w});
  std::vector<std::unique_ptr<ToyNetwork::Cache>> caches(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    crop_into(net_->forward(to_input(images, b), &caches[b]), logits, b);
  }
  const LossValue lv = loss(logits);
  if (lv.grad_logits.shape() != logits.shape()) throw ShapeMismatch("loss gradient does not match logits");

  const int ph = static_cast<int>(round_up(h)), pw = static_cast<int>(round_up(w));
  Tensor grad(images.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const nn::FeatureMap dx = net_->backward(*caches[b], pad_from(lv.grad_logits, b, ph, pw), nullptr, true);
    caches[b].reset();
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          grad(b, c, y, x) = dx.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(y * pw + x)) / kStd[c];
        }
      }
    }
  }
  return grad;
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  std::as_const(*net_).visit([&n](const nn::Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

std::vector<double> ToyModel::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  std::as_const(*net_).visit([&flat](const nn::Matrix& m) { flat.insert(flat.end(), m.data(), m.data() + m.size()); });
  return flat;
}

void ToyModel::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeMismatch("expected " + std::to_string(parameter_count()) + " parameters, got " +
                        std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  net_->visit([&](nn::Matrix& m) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), m.size(), m.data());
    offset += static_cast<std::size_t>(m.size());
  });
}

double ToyModel::parameter_gradient(const Tensor& images, const ScalarLossFn& loss, std::vector<double>& grad) const {
  check_batch(images);
  const std::size_t batch = images.dim(0);
  const std::size_t h = images.dim(2), w = images.dim(3);
  Tensor logits({batch, static_cast<std::size_t>(cfg_.num_classes), h, w});
  std::vector<std::unique_ptr<ToyNetwork::Cache>> caches(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    crop_into(net_->forward(to_input(images, b), &caches[b]), logits, b);
  }
  const LossValue lv = loss(logits);
  if (lv.grad_logits.shape() != logits.shape()) throw ShapeMismatch("loss gradient does not match logits");

  const int ph = static_cast<int>(round_up(h)), pw = static_cast<int>(round_up(w));
  auto acc = net_->zeros_like();
  for (std::size_t b = 0; b < batch; ++b) {
    net_->backward(*caches[b], pad_from(lv.grad_logits, b, ph, pw), acc.get(), false);
    caches[b].reset();
  }
  grad.clear();
  grad.reserve(parameter_count());
  std::as_const(*acc).visit([&grad](const nn::Matrix& m) { grad.insert(grad.end(), m.data(), m.data() + m.size()); });
  return lv.value;
}

std::uint64_t ToyModel::parameter_checksum() const {
  // FNV-1a over the little-endian bytes of every parameter.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::as_const(*net_).visit([&h](const nn::Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
      for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  });
  return h;
}

std::size_t ToyModel::receptive_radius() const { return net_->receptive_radius(256); }

void ToyModel::save_weights(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kWeightsMagic, 4);
  write_pod(os, kWeightsVersion);
  write_pod(os, static_cast<std::uint32_t>(cfg_.kind));
  write_pod(os, static_cast<std::int32_t>(cfg_.num_classes));
  write_pod(os, static_cast<std::int32_t>(cfg_.width));
  write_pod(os, cfg_.seed);
  const std::vector<double> flat = parameters();
  write_pod(os, static_cast<std::uint64_t>(flat.size()));
  os.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!os) throw IoError("failed writing " + path.string());
}

ToyModel ToyModel::load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kWeightsMagic, 4) != 0) throw FormatError(path.string() + " is not a weights file");
  if (read_pod<std::uint32_t>(is) != kWeightsVersion) throw FormatError("unsupported weights version");
  const auto kind = read_pod<std::uint32_t>(is);
  if (kind > 1) throw FormatError("unknown model kind in weights file");
  ToyModelConfig cfg;
  cfg.kind = static_cast<ToyKind>(kind);
  cfg.num_classes = read_pod<std::int32_t>(is);
  cfg.width = read_pod<std::int32_t>(is);
  cfg.seed = read_pod<std::uint64_t>(is);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad weights header: ") + e.what());
  }
  ToyModel model(cfg);
  const auto count = read_pod<std::uint64_t>(is);
  if (count != model.parameter_count()) throw FormatError("weights file parameter count mismatch");
  std::vector<double> flat(count);
  is.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw FormatError("truncated weights file");
  model.set_parameters(flat);
  model.set_inference_mode();
  return model;
}

std::unique_ptr<ToyModel> build_toy_model(const ToyModelConfig& cfg) { return std::make_unique<ToyModel>(cfg); }

AdapterRegistry AdapterRegistry::with_builtins() {
  AdapterRegistry reg;
  for (ToyKind kind : {ToyKind::kTinyCnn, ToyKind::kTinyAttention}) {
    reg.register_adapter(to_string(kind), [kind](const AdapterOptions& opt) -> std::unique_ptr<ModelAdapter> {
      if (!opt.weights.empty()) {
        auto model = std::make_unique<ToyModel>(ToyModel::load_weights(opt.weights));
        if (model->config().kind != kind) {
          throw FormatError(opt.weights.string() + " holds " + model->name() + " weights, not " + to_string(kind));
        }
        return model;
      }
      auto model = build_toy_model({.kind = kind, .num_classes = opt.num_classes, .width = opt.width, .seed = opt.seed});
      model->set_inference_mode();
      return model;
    });
  }
  return reg;
}

AdapterRegistry& AdapterRegistry::global() {
  static AdapterRegistry reg = with_builtins();
  return reg;
}

void AdapterRegistry::register_adapter(const std::string& name, AdapterFactory factory) {
  if (name.empty()) throw ConfigError("adapter name must not be empty");
  if (factories_.contains(name)) throw DuplicateName("adapter '" + name + "' is already registered");
  factories_.emplace(name, std::move(factory));
}

std::unique_ptr<ModelAdapter> AdapterRegistry::get_adapter(const std::string& name,
                                                           const AdapterOptions& options) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) throw UnknownModel("no adapter named '" + name + "'");
  return it->second(options);
}

bool AdapterRegistry::contains(const std::string& name) const { return factories_.contains(name); }

std::vector<std::string> AdapterRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : factories_) out.push_back(name);
  return out;
}

Tensor forward_single(const ModelAdapter& adapter, const Tensor& image) {
  if (image.rank() != 3) throw ShapeMismatch("expected an image [3,H,W], got " + shape_string(image.shape()));
  const Tensor batch = Tensor::stack(std::span<const Tensor>(&image, 1));
  return adapter.forward(batch).slice(0);
}

LabelMap predict_labels(const ModelAdapter& adapter, const Tensor& image) {
  return argmax_labels(forward_single(adapter, image));
}

}  // namespace patchforge
