#include "protocore/model.hpp"

#include <cmath>
#include <limits>

#include "protocore/errors.hpp"
#include "protocore/optimizer.hpp"

namespace protocore {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double sd, Rng& rng) {
  std::normal_distribution<double> dist(0.0, sd);
  Tensor t = Tensor::zeros({rows, cols});
  for (auto& v : t.values) v = dist(rng);
  return t;
}

void check_width(std::string_view what, const Tensor& x, std::size_t expected) {
  if (x.rank() != 2 || x.shape[1] != expected) {
    throw ShapeError(std::string(what) + ": expected [n x " + std::to_string(expected) + "] input, got " +
                     shape_string(x.shape));
  }
}

void load_into(std::vector<Tensor*> dst, const std::vector<NamedTensor>& src, std::string_view what) {
  if (dst.size() != src.size()) {
    throw ValidationError(std::string(what) + ": expected " + std::to_string(dst.size()) + " tensors, got " +
                          std::to_string(src.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->shape != src[i].tensor.shape) {
      throw ValidationError(std::string(what) + ": tensor " + src[i].name + " has shape " +
                            shape_string(src[i].tensor.shape) + ", expected " + shape_string(dst[i]->shape));
    }
    dst[i]->values = src[i].tensor.values;
  }
}

// Inverts a small dense square matrix; returns false when singular.
bool invert(std::vector<double>& a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < 1e-12) return false;
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(a[col * n + k], a[piv * n + k]);
      std::swap(inv[col * n + k], inv[piv * n + k]);
    }
    const double p = a[col * n + col];
    for (std::size_t k = 0; k < n; ++k) {
      a[col * n + k] /= p;
      inv[col * n + k] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        a[r * n + k] -= f * a[col * n + k];
        inv[r * n + k] -= f * inv[col * n + k];
      }
    }
  }
  a = std::move(inv);
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(EncoderConfig config) : config_(config) {
  if (config_.input_dim == 0 || config_.hidden_dim == 0 || config_.embedding_dim == 0) {
    throw ValidationError("encoder dimensions must be positive");
  }
  std::size_t fan_in = config_.input_dim;
  for (std::size_t l = 0; l < config_.hidden_layers; ++l) {
    params_.push_back(Tensor::zeros({fan_in, config_.hidden_dim}));
    params_.push_back(Tensor::zeros({config_.hidden_dim}));
    fan_in = config_.hidden_dim;
  }
  params_.push_back(Tensor::zeros({fan_in, config_.embedding_dim}));
  params_.push_back(Tensor::zeros({config_.embedding_dim}));
}

Encoder::Encoder(EncoderConfig config, Rng& rng) : Encoder(config) {
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    const bool last = i + 2 == params_.size();
    const auto fan_in = params_[i].shape[0];
    const double sd = std::sqrt((last ? 1.0 : 2.0) / static_cast<double>(fan_in));
    params_[i] = random_matrix(params_[i].shape[0], params_[i].shape[1], sd, rng);
  }
}

std::vector<Var> Encoder::bind(Tape& tape, bool trainable) {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(trainable ? tape.leaf(p) : tape.constant(p));
  return out;
}

Var Encoder::encode(std::span<const Var> params, Var x) const {
  if (params.size() != params_.size()) throw ValidationError("encoder: wrong number of bound parameters");
  check_width("encode", x.value(), config_.input_dim);
  Var h = x;
  for (std::size_t i = 0; i < params.size(); i += 2) {
    h = add(matmul(h, params[i]), params[i + 1]);
    if (i + 2 < params.size()) h = relu(h);
  }
  return h;
}

Tensor Encoder::encode(const Tensor& x) const {
  Tape tape;
  std::vector<Var> params;
  for (const auto& p : params_) params.push_back(tape.constant(p));
  return encode(params, tape.constant(x)).value();
}

std::vector<Tensor*> Encoder::parameters() {
  std::vector<Tensor*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<NamedTensor> Encoder::named_parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"encoder." + std::to_string(i / 2) + (i % 2 == 0 ? ".weight" : ".bias"), params_[i]});
  }
  return out;
}

void Encoder::load(const std::vector<NamedTensor>& params) { load_into(parameters(), params, "encoder"); }

// ---------------------------------------------------------------------------
// Classifier

Classifier::Classifier(std::size_t embedding_dim, std::size_t num_classes)
    : weight_(Tensor::zeros({embedding_dim, num_classes})), bias_(Tensor::zeros({num_classes})) {}

Classifier::Classifier(std::size_t embedding_dim, std::size_t num_classes, Rng& rng)
    : Classifier(embedding_dim, num_classes) {
  weight_ = random_matrix(embedding_dim, num_classes, std::sqrt(1.0 / static_cast<double>(embedding_dim)), rng);
}

std::vector<Var> Classifier::bind(Tape& tape, bool trainable) {
  if (trainable) return {tape.leaf(weight_), tape.leaf(bias_)};
  return {tape.constant(weight_), tape.constant(bias_)};
}

Var Classifier::classify(std::span<const Var> params, Var embedding) const {
  if (params.size() != 2) throw ValidationError("classifier: wrong number of bound parameters");
  check_width("classify", embedding.value(), embedding_dim());
  return add(matmul(embedding, params[0]), params[1]);
}

Tensor Classifier::classify(const Tensor& embedding) const {
  Tape tape;
  const Var params[] = {tape.constant(weight_), tape.constant(bias_)};
  return classify(params, tape.constant(embedding)).value();
}

std::vector<NamedTensor> Classifier::named_parameters() const {
  return {{"classifier.weight", weight_}, {"classifier.bias", bias_}};
}

void Classifier::load(const std::vector<NamedTensor>& params) { load_into(parameters(), params, "classifier"); }

std::vector<int> argmax_rows(const Tensor& logits, const std::vector<bool>& allowed) {
  const std::size_t n = logits.rows(), c = logits.cols();
  if (!allowed.empty() && allowed.size() != c) throw ShapeError("argmax_rows: mask length does not match class count");
  std::vector<int> out(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (!allowed.empty() && !allowed[j]) continue;
      const double v = logits.values[i * c + j];
      if (out[i] < 0 || v > best) {
        best = v;
        out[i] = static_cast<int>(j);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoder

Decoder Decoder::identity(std::size_t dim) {
  if (dim == 0) throw ValidationError("identity decoder needs a positive dimension");
  Decoder d;
  d.kind_ = DecoderKind::identity;
  d.latent_dim_ = dim;
  d.output_dim_ = dim;
  return d;
}

Decoder Decoder::linear(Tensor weight, Tensor bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.shape[0] != weight.shape[1]) {
    throw ShapeError("linear decoder: weight " + shape_string(weight.shape) + " and bias " + shape_string(bias.shape) +
                     " are not conformable");
  }
  Decoder d;
  d.kind_ = DecoderKind::linear;
  d.latent_dim_ = weight.shape[0];
  d.output_dim_ = weight.shape[1];
  d.weight_ = std::move(weight);
  d.bias_ = std::move(bias);

  // Least-squares right inverse: z = (s - b) W^T (W W^T)^-1.
  const std::size_t l = d.latent_dim_, o = d.output_dim_;
  std::vector<double> gram(l * l, 0.0);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t k = 0; k < o; ++k) gram[i * l + j] += d.weight_.values[i * o + k] * d.weight_.values[j * o + k];
  d.project_ = Tensor::zeros({o, l});
  if (invert(gram, l)) {
    for (std::size_t k = 0; k < o; ++k)
      for (std::size_t j = 0; j < l; ++j)
        for (std::size_t i = 0; i < l; ++i) d.project_.values[k * l + j] += d.weight_.values[i * o + k] * gram[i * l + j];
  }
  d.project_bias_ = Tensor::zeros({l});
  for (std::size_t j = 0; j < l; ++j)
    for (std::size_t k = 0; k < o; ++k) d.project_bias_.values[j] -= d.bias_.values[k] * d.project_.values[k * l + j];
  return d;
}

Decoder Decoder::pretrain_linear(const Tensor& inputs, std::size_t latent_dim, std::size_t steps, std::uint64_t seed) {
  if (inputs.rank() != 2 || latent_dim == 0) throw ValidationError("pretrain_linear: need [n x d] inputs and latent_dim > 0");
  const std::size_t d = inputs.shape[1];
  Rng rng = make_rng(seed, "decoder-pretrain");
  Tensor enc_w = random_matrix(d, latent_dim, std::sqrt(1.0 / static_cast<double>(d)), rng);
  Tensor enc_b = Tensor::zeros({latent_dim});
  Tensor dec_w = random_matrix(latent_dim, d, std::sqrt(1.0 / static_cast<double>(latent_dim)), rng);
  Tensor dec_b = Tensor::zeros({d});
  Optimizer opt({OptimizerKind::adam, 0.01}, {&enc_w, &enc_b, &dec_w, &dec_b});
  for (std::size_t s = 0; s < steps; ++s) {
    opt.zero_grad();
    Tape tape;
    Var x = tape.constant(inputs);
    Var z = add(matmul(x, tape.leaf(enc_w)), tape.leaf(enc_b));
    Var r = add(matmul(z, tape.leaf(dec_w)), tape.leaf(dec_b));
    Var loss = mse(r, x);
    if (!std::isfinite(loss.item())) throw NumericalError("decoder pretraining diverged");
    tape.backward(loss);
    opt.step();
  }
  Decoder out = linear(dec_w, dec_b);
  out.project_ = enc_w;
  out.project_bias_ = enc_b;
  return out;
}

Var Decoder::decode(Tape& tape, Var z) const {
  check_width("decode", z.value(), latent_dim_);
  if (kind_ == DecoderKind::identity) return z;
  return add(matmul(z, tape.constant(weight_)), tape.constant(bias_));
}

Tensor Decoder::decode(const Tensor& z) const {
  Tape tape;
  return decode(tape, tape.constant(z)).value();
}

Tensor Decoder::project(const Tensor& x) const {
  check_width("project", x, output_dim_);
  if (kind_ == DecoderKind::identity) return x;
  Tape tape;
  return add(matmul(tape.constant(x), tape.constant(project_)), tape.constant(project_bias_)).value();
}

std::vector<NamedTensor> Decoder::named_parameters() const {
  if (kind_ == DecoderKind::identity) return {};
  return {{"decoder.weight", weight_}, {"decoder.bias", bias_}, {"decoder.project", project_},
          {"decoder.project_bias", project_bias_}};
}

}  // namespace protocore
