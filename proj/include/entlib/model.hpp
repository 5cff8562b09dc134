#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "entlib/batch.hpp"
#include "entlib/common.hpp"
#include "entlib/corpus.hpp"
#include "entlib/embeddings.hpp"
#include "entlib/ops.hpp"
#include "entlib/tensor.hpp"

// The entity-linking model: token+speaker embedding, activation, BiLSTM, and
// per-mention scoring. Two scoring heads exist: the retrieval head maps the
// hidden state into the entity-vector space and resolves by cosine similarity
// against a learned entity library; the direct head applies softmax to a
// plain linear map of the hidden state.

namespace entlib {

enum class Variant { EntLib, NoEntLib };
enum class Activation { Tanh, Relu, Identity };

inline std::string to_string(Variant v) { return v == Variant::EntLib ? "entlib" : "noentlib"; }
inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    default: return "identity";
  }
}
inline Variant variant_from_string(const std::string& s) {
  if (s == "entlib") return Variant::EntLib;
  if (s == "noentlib") return Variant::NoEntLib;
  throw ConfigError("unknown model variant '" + s + "' (expected entlib|noentlib)");
}
inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "' (expected tanh|relu|identity)");
}

struct ModelConfig {
  std::size_t token_dim = 300;
  std::size_t entity_dim = 134;  // k: entity library and speaker embedding width
  std::size_t lstm_dim = 459;    // d: hidden units per direction
  Variant variant = Variant::EntLib;
  Activation activation = Activation::Tanh;
  real dropout_input = real(0.008);
  real dropout_hidden = real(0.0013);
  std::uint64_t seed = 1;

  std::size_t input_dim() const { return token_dim + entity_dim; }
  std::size_t hidden_dim() const { return 2 * lstm_dim; }

  void validate() const {
    if (token_dim < 1 || entity_dim < 1 || lstm_dim < 1) {
      throw ConfigError("model dimensions must be >= 1");
    }
    if (!(dropout_input >= 0 && dropout_input < 1) ||
        !(dropout_hidden >= 0 && dropout_hidden < 1)) {
      throw ConfigError("dropout rates must lie in [0,1)");
    }
  }
};

// Weights of one LSTM direction, gates packed in (input, forget, cell,
// output) order: input_weight [4d x in], recurrent_weight [4d x d], bias [4d].
struct LstmDirection {
  Tensor input_weight;
  Tensor recurrent_weight;
  Tensor bias;
};

struct ModelParams {
  Tensor token_embedding;    // |V| x token_dim
  Tensor speaker_embedding;  // |S| x k
  LstmDirection forward_lstm;
  LstmDirection backward_lstm;
  Tensor output_weight;      // 2d x k (retrieval head) or 2d x N (direct head)
  Tensor output_bias;        // k or N
  Tensor entity_library;     // N x k, retrieval head only

  Variant variant = Variant::EntLib;

  std::vector<Tensor> trainable() const {
    std::vector<Tensor> out{token_embedding,   speaker_embedding,
                            forward_lstm.input_weight, forward_lstm.recurrent_weight,
                            forward_lstm.bias, backward_lstm.input_weight,
                            backward_lstm.recurrent_weight, backward_lstm.bias,
                            output_weight,     output_bias};
    if (variant == Variant::EntLib) out.push_back(entity_library);
    return out;
  }

  std::vector<std::pair<std::string, Tensor>> named() const {
    std::vector<std::pair<std::string, Tensor>> out{
        {"token_embedding", token_embedding},
        {"speaker_embedding", speaker_embedding},
        {"lstm_forward_input_weight", forward_lstm.input_weight},
        {"lstm_forward_recurrent_weight", forward_lstm.recurrent_weight},
        {"lstm_forward_bias", forward_lstm.bias},
        {"lstm_backward_input_weight", backward_lstm.input_weight},
        {"lstm_backward_recurrent_weight", backward_lstm.recurrent_weight},
        {"lstm_backward_bias", backward_lstm.bias},
        {"output_weight", output_weight},
        {"output_bias", output_bias}};
    if (variant == Variant::EntLib) out.emplace_back("entity_library", entity_library);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : trainable()) n += t.size();
    return n;
  }

  ModelParams deep_copy() const {
    ModelParams p = *this;
    p.token_embedding = token_embedding.deep_copy();
    p.speaker_embedding = speaker_embedding.deep_copy();
    p.forward_lstm = {forward_lstm.input_weight.deep_copy(),
                      forward_lstm.recurrent_weight.deep_copy(), forward_lstm.bias.deep_copy()};
    p.backward_lstm = {backward_lstm.input_weight.deep_copy(),
                       backward_lstm.recurrent_weight.deep_copy(), backward_lstm.bias.deep_copy()};
    p.output_weight = output_weight.deep_copy();
    p.output_bias = output_bias.deep_copy();
    if (variant == Variant::EntLib) p.entity_library = entity_library.deep_copy();
    return p;
  }

  void zero_grads() const {
    for (const Tensor& t : trainable()) t.zero_grad();
  }

  // E rows must keep nonzero norms for cosine retrieval to stay defined.
  void check_entity_rows() const {
    if (variant != Variant::EntLib) return;
    const std::size_t n = entity_library.rows(), k = entity_library.cols();
    for (std::size_t i = 0; i < n; ++i) {
      real norm2 = 0;
      for (std::size_t j = 0; j < k; ++j) norm2 += entity_library.at(i, j) * entity_library.at(i, j);
      if (norm2 == real(0)) {
        throw DegenerateInputError("entity library row " + std::to_string(i) +
                                   " collapsed to zero norm");
      }
    }
  }
};

namespace detail {

inline void fill_uniform(Tensor& t, real bound, Rng& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.at(i) = static_cast<real>(uniform_real(rng, -bound, bound));
  }
}

inline Tensor xavier_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::zeros({rows, cols}, true);
  const real bound = static_cast<real>(std::sqrt(6.0 / static_cast<double>(rows + cols)));
  fill_uniform(t, bound, rng);
  return t;
}

inline LstmDirection init_lstm_direction(std::size_t d, std::size_t in, Rng& rng) {
  LstmDirection dir;
  dir.input_weight = xavier_matrix(4 * d, in, rng);
  dir.recurrent_weight = xavier_matrix(4 * d, d, rng);
  dir.bias = Tensor::zeros({4 * d}, true);
  for (std::size_t i = d; i < 2 * d; ++i) dir.bias.at(i) = real(1);  // forget gate
  return dir;
}

}  // namespace detail

// Xavier-uniform init for all matrices; token embeddings are copied from the
// pretrained matrix when one is supplied. The forget-gate bias starts at 1 and
// entity rows are re-drawn if they ever land on exactly zero norm.
inline ModelParams init_params(const ModelConfig& config, const Vocabulary& vocab,
                               const EmbeddingMatrix* pretrained, std::uint64_t seed) {
  config.validate();
  const std::size_t vocab_size = vocab.token_count();
  const std::size_t speaker_count = vocab.speaker_count();
  const std::size_t n_entities = vocab.entity_count();
  if (n_entities == 0) throw ConfigError("cannot build a model over zero entities");
  if (pretrained && (pretrained->rows != vocab_size || pretrained->dim != config.token_dim)) {
    throw ConfigError("pretrained matrix is " + std::to_string(pretrained->rows) + "x" +
                      std::to_string(pretrained->dim) + " but vocabulary/config need " +
                      std::to_string(vocab_size) + "x" + std::to_string(config.token_dim));
  }

  Rng rng(mix_seed(seed, 0x696e6974ull));
  ModelParams p;
  p.variant = config.variant;

  if (pretrained) {
    p.token_embedding = Tensor::from(pretrained->values, {vocab_size, config.token_dim}, true);
  } else {
    p.token_embedding = detail::xavier_matrix(vocab_size, config.token_dim, rng);
  }
  p.speaker_embedding = detail::xavier_matrix(speaker_count, config.entity_dim, rng);
  p.forward_lstm = detail::init_lstm_direction(config.lstm_dim, config.input_dim(), rng);
  p.backward_lstm = detail::init_lstm_direction(config.lstm_dim, config.input_dim(), rng);

  const std::size_t head_width = config.variant == Variant::EntLib ? config.entity_dim : n_entities;
  p.output_weight = detail::xavier_matrix(config.hidden_dim(), head_width, rng);
  p.output_bias = Tensor::zeros({head_width}, true);

  if (config.variant == Variant::EntLib) {
    p.entity_library = detail::xavier_matrix(n_entities, config.entity_dim, rng);
    for (std::size_t i = 0; i < n_entities; ++i) {
      real norm2 = 0;
      for (std::size_t j = 0; j < config.entity_dim; ++j) {
        norm2 += p.entity_library.at(i, j) * p.entity_library.at(i, j);
      }
      while (norm2 == real(0)) {  // vanishing probability, but keep the guarantee
        const real bound =
            static_cast<real>(std::sqrt(6.0 / static_cast<double>(n_entities + config.entity_dim)));
        norm2 = 0;
        for (std::size_t j = 0; j < config.entity_dim; ++j) {
          p.entity_library.at(i, j) = static_cast<real>(uniform_real(rng, -bound, bound));
          norm2 += p.entity_library.at(i, j) * p.entity_library.at(i, j);
        }
      }
    }
  }
  return p;
}

inline Tensor apply_activation(Tape* tape, const Tensor& x, Activation act) {
  switch (act) {
    case Activation::Tanh: return entlib::tanh(tape, x);
    case Activation::Relu: return relu(tape, x);
    default: return x;
  }
}

// Input embedding for one position: the token row concatenated with the sum
// of the speaker rows, input dropout, then the activation.
inline Tensor embed_input(Tape* tape, int token_index, const std::vector<int>& speaker_indices,
                          const ModelParams& params, const ModelConfig& config, bool training,
                          Rng& rng) {
  if (speaker_indices.empty()) throw DataError("embed_input: empty speaker set");
  if (token_index < 0 ||
      static_cast<std::size_t>(token_index) >= params.token_embedding.rows()) {
    throw IndexError("embed_input: token index " + std::to_string(token_index) + " out of range");
  }
  Tensor tok = row(tape, params.token_embedding, static_cast<std::size_t>(token_index));
  Tensor spk = rows_sum(tape, params.speaker_embedding, speaker_indices);
  Tensor x = concat(tape, tok, spk);
  x = dropout(tape, x, config.dropout_input, training, rng);
  return apply_activation(tape, x, config.activation);
}

namespace detail {

struct LstmState {
  Tensor h;
  Tensor c;
};

inline LstmState lstm_cell(Tape* tape, const LstmDirection& dir, const Tensor& x,
                           const LstmState& prev, std::size_t d) {
  Tensor pre = add(tape, add(tape, matvec(tape, dir.input_weight, x),
                             matvec(tape, dir.recurrent_weight, prev.h)),
                   dir.bias);
  Tensor gate_in = sigmoid(tape, slice(tape, pre, 0, d));
  Tensor gate_forget = sigmoid(tape, slice(tape, pre, d, 2 * d));
  Tensor cell_cand = entlib::tanh(tape, slice(tape, pre, 2 * d, 3 * d));
  Tensor gate_out = sigmoid(tape, slice(tape, pre, 3 * d, 4 * d));
  Tensor c = add(tape, mul(tape, gate_forget, prev.c), mul(tape, gate_in, cell_cand));
  Tensor h = mul(tape, gate_out, entlib::tanh(tape, c));
  return {h, c};
}

}  // namespace detail

// Single-direction scan over a sequence from zero initial state; returns one
// hidden state per input, in input order.
inline std::vector<Tensor> lstm_scan(Tape* tape, const LstmDirection& dir,
                                     const std::vector<Tensor>& inputs, std::size_t d) {
  detail::LstmState state{Tensor::zeros({d}), Tensor::zeros({d})};
  std::vector<Tensor> states;
  states.reserve(inputs.size());
  for (const Tensor& x : inputs) {
    state = detail::lstm_cell(tape, dir, x, state, d);
    states.push_back(state.h);
  }
  return states;
}

// Per-position hidden states of the bidirectional LSTM: the forward and
// backward directional states concatenated, with hidden dropout in training.
// The mask must be a block of ones followed by padding zeros; padded
// positions produce zero states and no state updates.
inline std::vector<Tensor> bilstm_forward(Tape* tape, const std::vector<Tensor>& inputs,
                                          const std::vector<std::uint8_t>& mask,
                                          const ModelParams& params, const ModelConfig& config,
                                          bool training, Rng& rng) {
  if (inputs.empty()) throw ShapeError("bilstm_forward: empty input sequence");
  if (mask.size() != inputs.size()) {
    throw ShapeError("bilstm_forward: mask length " + std::to_string(mask.size()) +
                     " does not match sequence length " + std::to_string(inputs.size()));
  }
  std::size_t len = 0;
  while (len < mask.size() && mask[len]) ++len;
  for (std::size_t i = len; i < mask.size(); ++i) {
    if (mask[i]) throw ShapeError("bilstm_forward: mask must be contiguous ones then zeros");
  }
  if (len == 0) throw ShapeError("bilstm_forward: all-padding chunk");

  const std::size_t d = config.lstm_dim;
  std::vector<Tensor> real_inputs(inputs.begin(), inputs.begin() + static_cast<long>(len));
  std::vector<Tensor> fwd = lstm_scan(tape, params.forward_lstm, real_inputs, d);

  std::vector<Tensor> reversed(real_inputs.rbegin(), real_inputs.rend());
  std::vector<Tensor> bwd_rev = lstm_scan(tape, params.backward_lstm, reversed, d);

  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < len; ++i) {
    Tensor h = concat(tape, fwd[i], bwd_rev[len - 1 - i]);
    out.push_back(dropout(tape, h, config.dropout_hidden, training, rng));
  }
  for (std::size_t i = len; i < inputs.size(); ++i) {
    out.push_back(Tensor::zeros({config.hidden_dim()}));  // never consumed
  }
  return out;
}

// Mention scoring. Retrieval head: map the hidden state into the entity
// space, compare against every library row by cosine, softmax over the
// similarity profile. Direct head: softmax over the linear map itself.
inline Tensor score_mention(Tape* tape, const Tensor& hidden, const ModelParams& params,
                            const ModelConfig& config) {
  if (hidden.size() != config.hidden_dim()) {
    throw ShapeError("score_mention: hidden width " + std::to_string(hidden.size()) +
                     ", expected " + std::to_string(config.hidden_dim()));
  }
  Tensor projected = add(tape, vecmat(tape, hidden, params.output_weight), params.output_bias);
  if (config.variant == Variant::EntLib) {
    return softmax(tape, cosine_rows(tape, params.entity_library, projected));
  }
  return softmax(tape, projected);
}

// Argmax with ties broken to the lowest entity index.
inline int predict(const Tensor& probs) {
  if (probs.rank() != 1 || probs.size() == 0) {
    throw ShapeError("predict expects a non-empty probability vector");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs.at(i) > probs.at(best)) best = i;
  }
  return static_cast<int>(best);
}

struct MentionOutput {
  std::size_t position = 0;
  Tensor probs;
  int predicted = 0;
};

// Full forward pass over one chunk: embeds every real position, runs the
// BiLSTM, and scores exactly the span-final mention positions. Output order
// matches chunk.mentions.
inline std::vector<MentionOutput> forward_chunk(Tape* tape, const Chunk& chunk,
                                                const ModelParams& params,
                                                const ModelConfig& config, bool training,
                                                Rng& rng) {
  std::vector<MentionOutput> outputs;
  if (chunk.true_len == 0) return outputs;
  std::vector<Tensor> inputs;
  inputs.reserve(chunk.true_len);
  for (std::size_t i = 0; i < chunk.true_len; ++i) {
    inputs.push_back(
        embed_input(tape, chunk.token_ids[i], chunk.speakers[i], params, config, training, rng));
  }
  std::vector<std::uint8_t> mask(chunk.mask.begin(), chunk.mask.begin() + chunk.true_len);
  std::vector<Tensor> hidden = bilstm_forward(tape, inputs, mask, params, config, training, rng);
  outputs.reserve(chunk.mentions.size());
  for (const MentionRef& m : chunk.mentions) {
    if (m.position >= chunk.true_len) {
      throw IndexError("mention position beyond chunk length");
    }
    Tensor probs = score_mention(tape, hidden[m.position], params, config);
    outputs.push_back(MentionOutput{m.position, probs, predict(probs)});
  }
  return outputs;
}

}  // namespace entlib
