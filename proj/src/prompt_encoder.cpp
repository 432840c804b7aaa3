#include "zeroprompt/prompt_encoder.hpp"

#include <cmath>

namespace zeroprompt {

namespace {

void validate_encoder(const PromptEncoder& enc) {
  const int n = enc.num_layers();
  if (n < 2)
    throw std::invalid_argument("prompt encoder needs at least two layers");
  if (enc.injection_layer < 1 || enc.injection_layer >= n)
    throw std::invalid_argument("injection layer must lie in [1, N-1]");
  if (enc.random_prompt.empty())
    throw std::invalid_argument("random prompt must be nonempty");
  const Index d = enc.width();
  for (const auto& layer : enc.layers) {
    if (layer.weight.rows() != d || layer.weight.cols() != d ||
        layer.bias.size() != d)
      throw std::invalid_argument("prompt encoder layer shapes disagree");
  }
  if (enc.input_embed.cols() != d)
    throw std::invalid_argument("input embedding width disagrees with layers");
}

Matrix embed_prompt(const PromptEncoder& enc) {
  Matrix e0(enc.prompt_rows(), enc.width());
  for (Index i = 0; i < enc.prompt_rows(); ++i) {
    const int t = enc.random_prompt[static_cast<std::size_t>(i)];
    if (t < 0 || t >= enc.input_embed.rows())
      throw std::out_of_range("random prompt token outside input table");
    e0.row(i) = enc.input_embed.row(t);
  }
  return e0;
}

inline Matrix apply_layer(const PromptEncoder& enc, const Matrix& x, int i) {
  Matrix z = x * enc.layers[static_cast<std::size_t>(i)].weight;
  z.rowwise() += enc.layers[static_cast<std::size_t>(i)].bias.transpose();
  if (enc.activation == Activation::tanh) z = z.array().tanh();
  return z;
}

Matrix run_layers(const PromptEncoder& enc, const SensitiveEmbedding* e_sen) {
  Matrix x = embed_prompt(enc);
  for (int i = 0; i < enc.injection_layer; ++i) x = apply_layer(enc, x, i);
  if (e_sen != nullptr && enc.injection_weight != 0.0) {
    if (e_sen->values.rows() != x.rows() || e_sen->values.cols() != x.cols())
      throw std::invalid_argument("sensitive embedding shape disagrees with encoder");
    x += enc.injection_weight * e_sen->values;
  }
  for (int i = enc.injection_layer; i < enc.num_layers(); ++i)
    x = apply_layer(enc, x, i);
  return x;
}

}  // namespace

SensitiveProjection make_sensitive_projection(Index text_dim, const EncoderDims& dims,
                                              std::uint64_t seed) {
  const Index out = dims.prompt_len * dims.hidden_dim;
  SensitiveProjection proj;
  proj.low = normal_matrix(mix_seed(seed, "proj_low"), text_dim, dims.low_dim,
                           1.0 / std::sqrt(static_cast<double>(text_dim)));
  proj.high = normal_matrix(mix_seed(seed, "proj_high"), dims.low_dim, out,
                            1.0 / std::sqrt(static_cast<double>(dims.low_dim)));
  return proj;
}

PromptEncoder make_prompt_encoder(const EncoderDims& dims, Index vocab_size,
                                  TokenSequence random_prompt, std::uint64_t seed,
                                  double injection_weight, double init_stddev) {
  if (static_cast<Index>(random_prompt.size()) != dims.prompt_len)
    throw std::invalid_argument("random prompt length disagrees with dims");
  PromptEncoder enc;
  enc.injection_layer = dims.injection_layer;
  enc.injection_weight = injection_weight;
  enc.random_prompt = std::move(random_prompt);
  // Rows of the input table get unit scale on average.
  enc.input_embed = normal_matrix(mix_seed(seed, "input_embed"), vocab_size,
                                  dims.hidden_dim,
                                  1.0 / std::sqrt(static_cast<double>(dims.hidden_dim)));
  enc.layers.reserve(static_cast<std::size_t>(dims.num_layers));
  for (int i = 0; i < dims.num_layers; ++i) {
    PromptEncoder::Layer layer;
    layer.weight = normal_matrix(mix_seed(seed, "layer_w", static_cast<std::uint64_t>(i)),
                                 dims.hidden_dim, dims.hidden_dim, init_stddev);
    layer.bias = normal_vector(mix_seed(seed, "layer_b", static_cast<std::uint64_t>(i)),
                               dims.hidden_dim, init_stddev);
    enc.layers.push_back(std::move(layer));
  }
  validate_encoder(enc);
  return enc;
}

SensitiveEmbedding project_sensitive(const TextEmbedding& e_tar,
                                     const SensitiveProjection& proj,
                                     Index rows, Index cols) {
  if (e_tar.values.size() != proj.low.rows())
    throw std::invalid_argument("project_sensitive: embedding length disagrees");
  if (proj.high.rows() != proj.low.cols())
    throw std::invalid_argument("project_sensitive: projection shapes disagree");
  if (proj.high.cols() != rows * cols)
    throw std::invalid_argument("project_sensitive: output shape disagrees");
  const Vector flat = proj.high.transpose() * (proj.low.transpose() * e_tar.values);
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  SensitiveEmbedding out;
  out.values = Eigen::Map<const RowMajor>(flat.data(), rows, cols);
  return out;
}

LearnableEmbedding encode_with_injection(const PromptEncoder& enc,
                                         const SensitiveEmbedding& e_sen) {
  validate_encoder(enc);
  return LearnableEmbedding{run_layers(enc, &e_sen)};
}

LearnableEmbedding encode_plain(const PromptEncoder& enc) {
  validate_encoder(enc);
  return LearnableEmbedding{run_layers(enc, nullptr)};
}

namespace {

void append_slice(ParamLayout& layout, Vector& values, const std::string& field,
                  const Matrix& m) {
  ParamLayout::Slice s{field, layout.size, m.rows(), m.cols()};
  values.segment(s.offset, m.size()) = m.reshaped<Eigen::RowMajor>();
  layout.size += m.size();
  layout.slices.push_back(std::move(s));
}

}  // namespace

ParamVector flatten_params(const SensitiveProjection& proj, const PromptEncoder& enc,
                           bool include_projection) {
  validate_encoder(enc);
  Index total = 0;
  for (const auto& layer : enc.layers) total += layer.weight.size() + layer.bias.size();
  if (include_projection) total += proj.low.size() + proj.high.size();

  auto layout = std::make_shared<ParamLayout>();
  layout->includes_projection = include_projection;
  Vector values(total);
  for (int i = 0; i < enc.num_layers(); ++i) {
    const auto& layer = enc.layers[static_cast<std::size_t>(i)];
    const std::string prefix = "layer" + std::to_string(i);
    append_slice(*layout, values, prefix + ".weight", layer.weight);
    append_slice(*layout, values, prefix + ".bias", layer.bias.transpose());
  }
  if (include_projection) {
    append_slice(*layout, values, "projection.low", proj.low);
    append_slice(*layout, values, "projection.high", proj.high);
  }
  return ParamVector{std::move(values), std::move(layout)};
}

void unflatten_params(const ParamVector& v, SensitiveProjection& proj,
                      PromptEncoder& enc) {
  if (!v.layout) throw std::invalid_argument("unflatten_params: missing layout");
  if (v.values.size() != v.layout->size)
    throw std::invalid_argument("unflatten_params: value length disagrees with layout");

  auto assign_matrix = [&](const ParamLayout::Slice& s, Matrix& dst) {
    if (dst.rows() != s.rows || dst.cols() != s.cols)
      throw std::invalid_argument("unflatten_params: slice shape disagrees for " + s.field);
    dst.reshaped<Eigen::RowMajor>() = v.values.segment(s.offset, s.rows * s.cols);
  };
  auto assign_bias = [&](const ParamLayout::Slice& s, Vector& dst) {
    if (s.rows != 1 || dst.size() != s.cols)
      throw std::invalid_argument("unflatten_params: slice shape disagrees for " + s.field);
    dst = v.values.segment(s.offset, s.cols);
  };

  for (const auto& s : v.layout->slices) {
    if (s.field.rfind("layer", 0) == 0) {
      const auto dot = s.field.find('.');
      const int idx = std::stoi(s.field.substr(5, dot - 5));
      if (idx < 0 || idx >= enc.num_layers())
        throw std::invalid_argument("unflatten_params: layer index out of range");
      auto& layer = enc.layers[static_cast<std::size_t>(idx)];
      if (s.field.substr(dot + 1) == "weight")
        assign_matrix(s, layer.weight);
      else
        assign_bias(s, layer.bias);
    } else if (s.field == "projection.low") {
      assign_matrix(s, proj.low);
    } else if (s.field == "projection.high") {
      assign_matrix(s, proj.high);
    } else {
      throw std::invalid_argument("unflatten_params: unknown field " + s.field);
    }
  }
}

}  // namespace zeroprompt
