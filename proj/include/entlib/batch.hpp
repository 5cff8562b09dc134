#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "entlib/common.hpp"
#include "entlib/corpus.hpp"

// Scene chunking and batch assembly. Scenes are the batching unit; each
// scene's token stream is split into consecutive chunks of at most chunk_len
// tokens. Chunks never span scene boundaries and never split a mention span:
// a boundary that would cut a span moves back to the span start. Hidden state
// is not carried across chunks.

namespace entlib {

struct MentionRef {
  std::size_t position = 0;  // index into the chunk's token stream
  int gold_entity = Vocabulary::kUnseenEntity;
  std::string gold_entity_id;
  std::string mention_id;
  std::string category;
};

struct Chunk {
  std::vector<int> token_ids;               // padded with the unknown index
  std::vector<std::vector<int>> speakers;   // per position; empty on padding
  std::vector<std::uint8_t> mask;           // 1 on real tokens, 0 on padding
  std::vector<MentionRef> mentions;         // span-final positions only
  std::string scene_id;
  std::size_t true_len = 0;
};

struct Batch {
  std::vector<Chunk> chunks;
};

namespace detail {

struct FlatToken {
  int token_id;
  std::vector<int> speaker_ids;
  bool span_begin = false;
  bool span_final = false;
  const Token* token = nullptr;
  std::size_t utterance = 0, index_in_utterance = 0;
};

inline std::vector<FlatToken> flatten_scene(const Scene& scene, const Vocabulary& vocab) {
  std::vector<FlatToken> flat;
  for (std::size_t u = 0; u < scene.utterances.size(); ++u) {
    const Utterance& utt = scene.utterances[u];
    std::vector<int> speaker_ids;
    speaker_ids.reserve(utt.speakers.size());
    for (const std::string& sp : utt.speakers) speaker_ids.push_back(vocab.speaker_index(sp));
    if (speaker_ids.empty()) {
      throw DataError("utterance without speakers in scene '" + scene.id + "'");
    }
    for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
      const Token& tok = utt.tokens[t];
      FlatToken ft;
      ft.token_id = vocab.token_index(tok.text);
      ft.speaker_ids = speaker_ids;
      ft.token = &tok;
      ft.utterance = u;
      ft.index_in_utterance = t;
      if (tok.mention) {
        ft.span_begin = tok.mention->kind == 'B' ||
                        (tok.mention->kind == 'E' && (t == 0 || !utt.tokens[t - 1].mention ||
                                                      utt.tokens[t - 1].mention->span_final()));
        ft.span_final = tok.mention->span_final();
      }
      flat.push_back(std::move(ft));
    }
  }
  return flat;
}

}  // namespace detail

// Chunks one scene into pieces of at most chunk_len tokens (no padding).
inline std::vector<Chunk> chunk_scene(const Scene& scene, const Vocabulary& vocab,
                                      std::size_t chunk_len) {
  if (chunk_len < 1) throw ConfigError("chunk_len must be >= 1");
  std::vector<detail::FlatToken> flat = detail::flatten_scene(scene, vocab);
  std::vector<Chunk> chunks;
  if (flat.empty()) return chunks;

  std::size_t start = 0;
  while (start < flat.size()) {
    std::size_t end = std::min(start + chunk_len, flat.size());
    if (end < flat.size() && flat[end].token->mention && !flat[end].span_begin) {
      // Boundary falls inside a span: shift it back to the span start.
      std::size_t cut = end;
      while (cut > start && flat[cut].token->mention && !flat[cut].span_begin) --cut;
      if (cut == start) {
        throw DataError("mention span longer than chunk_len in scene '" + scene.id + "'");
      }
      end = cut;
    }
    Chunk chunk;
    chunk.scene_id = scene.id;
    chunk.true_len = end - start;
    for (std::size_t i = start; i < end; ++i) {
      chunk.token_ids.push_back(flat[i].token_id);
      chunk.speakers.push_back(flat[i].speaker_ids);
      chunk.mask.push_back(1);
      if (flat[i].span_final) {
        MentionRef ref;
        ref.position = i - start;
        ref.gold_entity_id = flat[i].token->mention->entity_id;
        ref.gold_entity = vocab.entity_index(ref.gold_entity_id);
        ref.mention_id = make_mention_id(scene.id, flat[i].utterance, flat[i].index_in_utterance);
        ref.category = flat[i].token->category;
        chunk.mentions.push_back(std::move(ref));
      }
    }
    chunks.push_back(std::move(chunk));
    start = end;
  }
  return chunks;
}

inline void pad_batch(Batch& batch) {
  std::size_t longest = 0;
  for (const Chunk& c : batch.chunks) longest = std::max(longest, c.true_len);
  for (Chunk& c : batch.chunks) {
    c.token_ids.resize(longest, Vocabulary::kUnkIndex);
    c.speakers.resize(longest);
    c.mask.resize(longest, 0);
  }
}

// Batches of `batch_scenes` scenes each; scene order is shuffled per call
// when `shuffle` is set (one call per epoch).
inline std::vector<Batch> chunk_and_batch(const Corpus& corpus, const Vocabulary& vocab,
                                          std::size_t batch_scenes, std::size_t chunk_len,
                                          Rng& rng, bool shuffle = true) {
  if (batch_scenes < 1) throw ConfigError("batch_scenes must be >= 1");
  if (chunk_len < 1) throw ConfigError("chunk_len must be >= 1");
  std::vector<std::size_t> order(corpus.scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) shuffle_vec(order, rng);

  std::vector<Batch> batches;
  for (std::size_t b = 0; b < order.size(); b += batch_scenes) {
    Batch batch;
    const std::size_t hi = std::min(b + batch_scenes, order.size());
    for (std::size_t i = b; i < hi; ++i) {
      for (Chunk& c : chunk_scene(corpus.scenes[order[i]], vocab, chunk_len)) {
        batch.chunks.push_back(std::move(c));
      }
    }
    pad_batch(batch);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace entlib
