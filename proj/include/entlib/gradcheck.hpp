#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "entlib/batch.hpp"
#include "entlib/model.hpp"
#include "entlib/ops.hpp"
#include "entlib/synth.hpp"

// Full finite-difference audit of the composed model: analytic gradients from
// the tape are compared against central differences of the eval-mode loss,
// component by component, for every parameter group. The numeric side never
// touches the tape, so the two routes are independent.

namespace entlib {

struct GradCheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t components = 0;
};

struct GradCheckReport {
  std::string variant;
  std::vector<GradCheckGroup> groups;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

namespace detail {

inline double gradcheck_rel_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

}  // namespace detail

// `corrupt_group` is a test hook: adding a constant to that group's analytic
// gradients must make the audit fail (negative control).
inline GradCheckReport gradcheck_model(const ModelConfig& config, std::uint64_t seed,
                                       double tolerance = 1e-4, double fd_step = 1e-5,
                                       const std::string& corrupt_group = "") {
  const auto t0 = std::chrono::steady_clock::now();

  SynthConfig synth;
  synth.entities = 3;
  synth.scenes = 2;
  synth.utterances_per_scene = 2;
  synth.tokens_per_utterance = 5;
  synth.p_first_person = 0.3;
  synth.p_second_person = 0.15;
  synth.p_name = 0.25;
  synth.p_multiword = 0.3;
  synth.seed = mix_seed(seed, 0x66697874ull);
  Corpus corpus = synth_corpus(synth);
  Vocabulary vocab = build_vocab(corpus);

  ModelParams params = init_params(config, vocab, nullptr, seed);

  Rng batch_rng(mix_seed(seed, 1));
  std::vector<Batch> batches =
      chunk_and_batch(corpus, vocab, corpus.scenes.size(), 6, batch_rng, /*shuffle=*/false);
  const Batch& batch = batches.front();

  // Mean mention NLL over the batch, eval mode (no dropout), so the loss is a
  // pure function of the parameters.
  auto loss_value = [&](Tape* tape) {
    std::vector<Tensor> losses;
    Rng unused(0);
    for (const Chunk& chunk : batch.chunks) {
      auto outputs = forward_chunk(tape, chunk, params, config, /*training=*/false, unused);
      for (std::size_t i = 0; i < outputs.size(); ++i) {
        const int gold = chunk.mentions[i].gold_entity;
        losses.push_back(nll_loss(tape, outputs[i].probs, static_cast<std::size_t>(gold)));
      }
    }
    return average(tape, losses);
  };

  params.zero_grads();
  Tape tape;
  Tensor loss = loss_value(&tape);
  tape.backward(loss);

  GradCheckReport report;
  report.variant = to_string(config.variant);
  report.tolerance = tolerance;

  bool corrupt_seen = corrupt_group.empty();
  for (auto& [name, tensor] : params.named()) {
    if (name == corrupt_group) {
      corrupt_seen = true;
      for (std::size_t i = 0; i < tensor.size(); ++i) tensor.grad()[i] += real(1);
    }
    GradCheckGroup group;
    group.name = name;
    group.components = tensor.size();
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const real saved = tensor.at(i);
      tensor.at(i) = saved + static_cast<real>(fd_step);
      const double up = loss_value(nullptr).item();
      tensor.at(i) = saved - static_cast<real>(fd_step);
      const double down = loss_value(nullptr).item();
      tensor.at(i) = saved;
      const double numeric = (up - down) / (2.0 * fd_step);
      const double analytic = static_cast<double>(tensor.grad()[i]);
      group.max_rel_error =
          std::max(group.max_rel_error, detail::gradcheck_rel_error(analytic, numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    report.groups.push_back(std::move(group));
  }
  if (!corrupt_seen) {
    throw ConfigError("gradcheck: unknown parameter group '" + corrupt_group + "'");
  }

  report.passed = report.max_rel_error <= tolerance;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// The tiny configuration used by the verification gate.
inline ModelConfig gradcheck_config(Variant variant) {
  ModelConfig cfg;
  cfg.token_dim = 4;
  cfg.entity_dim = 3;
  cfg.lstm_dim = 5;
  cfg.variant = variant;
  cfg.dropout_input = 0;
  cfg.dropout_hidden = 0;
  return cfg;
}

}  // namespace entlib
