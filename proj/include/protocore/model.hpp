#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "protocore/autodiff.hpp"
#include "protocore/checkpoint.hpp"
#include "protocore/rng.hpp"
#include "protocore/tensor.hpp"

namespace protocore {

struct EncoderConfig {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t hidden_layers = 2;
  std::size_t embedding_dim = 16;
};

/// Feature extractor: relu MLP input_dim -> hidden_dim x hidden_layers -> embedding_dim.
/// The output layer is linear.
class Encoder {
 public:
  explicit Encoder(EncoderConfig config);  // all parameters zero
  Encoder(EncoderConfig config, Rng& rng);

  const EncoderConfig& config() const { return config_; }
  std::size_t input_dim() const { return config_.input_dim; }
  std::size_t embedding_dim() const { return config_.embedding_dim; }

  /// Puts the parameters on `tape`, as leaves when trainable and as constants otherwise.
  std::vector<Var> bind(Tape& tape, bool trainable);
  /// Differentiable forward pass of an [n x input_dim] batch through bound parameters.
  Var encode(std::span<const Var> params, Var x) const;
  /// Plain evaluation with the current parameter values.
  Tensor encode(const Tensor& x) const;

  std::vector<Tensor*> parameters();
  std::vector<NamedTensor> named_parameters() const;
  void load(const std::vector<NamedTensor>& params);

 private:
  EncoderConfig config_;
  std::vector<Tensor> params_;  // W0, b0, W1, b1, ...
};

/// Single affine head embedding_dim -> num_classes over every class of the stream.
class Classifier {
 public:
  Classifier(std::size_t embedding_dim, std::size_t num_classes);  // zero
  Classifier(std::size_t embedding_dim, std::size_t num_classes, Rng& rng);

  std::size_t embedding_dim() const { return weight_.shape[0]; }
  std::size_t num_classes() const { return weight_.shape[1]; }

  std::vector<Var> bind(Tape& tape, bool trainable);
  Var classify(std::span<const Var> params, Var embedding) const;
  Tensor classify(const Tensor& embedding) const;

  std::vector<Tensor*> parameters() { return {&weight_, &bias_}; }
  std::vector<NamedTensor> named_parameters() const;
  void load(const std::vector<NamedTensor>& params);

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Row-wise argmax over allowed classes; ties go to the lowest class id.
/// An empty mask allows every class.
std::vector<int> argmax_rows(const Tensor& logits, const std::vector<bool>& allowed = {});

enum class DecoderKind { identity, linear };

/// Maps latents to inputs, s = g(z). Parameters are never trained by exemplar synthesis.
class Decoder {
 public:
  static Decoder identity(std::size_t dim);
  static Decoder linear(Tensor weight, Tensor bias);

  /// Fits a linear autoencoder (input -> latent -> input) to `inputs` by
  /// mean squared reconstruction error and keeps its decoder half.
  static Decoder pretrain_linear(const Tensor& inputs, std::size_t latent_dim, std::size_t steps, std::uint64_t seed);

  DecoderKind kind() const { return kind_; }
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  /// Differentiable w.r.t. z; decoder parameters enter as constants.
  Var decode(Tape& tape, Var z) const;
  Tensor decode(const Tensor& z) const;
  /// Latent code for an input: identity for the identity kind, the fitted
  /// encoder half for a pretrained linear decoder, least-squares otherwise.
  Tensor project(const Tensor& x) const;

  std::vector<NamedTensor> named_parameters() const;

 private:
  DecoderKind kind_ = DecoderKind::identity;
  std::size_t latent_dim_ = 0;
  std::size_t output_dim_ = 0;
  Tensor weight_;   // [latent x output]
  Tensor bias_;     // [output]
  Tensor project_;  // [output x latent]
  Tensor project_bias_;  // [latent]
};

}  // namespace protocore
