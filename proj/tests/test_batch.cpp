#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <string>

#include "entlib/batch.hpp"
#include "entlib/synth.hpp"
#include "testutil.hpp"

using namespace entlib;

namespace {

Corpus one_scene_corpus(std::size_t tokens) {
  Corpus c;
  Scene s;
  s.id = "s";
  Utterance u;
  u.speakers.push_back("a");
  for (std::size_t i = 0; i < tokens; ++i) u.tokens.push_back(Token{"w" + std::to_string(i % 50), {}, ""});
  s.utterances.push_back(std::move(u));
  c.scenes.push_back(std::move(s));
  return c;
}

}  // namespace

TEST_CASE("a 1600-token scene chunks into 757, 757, 86") {
  Corpus c = one_scene_corpus(1600);
  Vocabulary v = build_vocab(c);
  auto chunks = chunk_scene(c.scenes[0], v, 757);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].true_len == 757);
  CHECK(chunks[1].true_len == 757);
  CHECK(chunks[2].true_len == 86);
}

TEST_CASE("a short scene is one unpadded chunk when alone") {
  Corpus c = one_scene_corpus(10);
  Vocabulary v = build_vocab(c);
  Rng rng(1);
  auto batches = chunk_and_batch(c, v, 24, 757, rng);
  REQUIRE(batches.size() == 1);
  REQUIRE(batches[0].chunks.size() == 1);
  const Chunk& ch = batches[0].chunks[0];
  CHECK(ch.true_len == 10);
  CHECK(ch.token_ids.size() == 10);
  for (auto m : ch.mask) CHECK(m == 1);
}

TEST_CASE("chunking conserves tokens and mentions") {
  SynthConfig cfg;
  cfg.entities = 4;
  cfg.scenes = 12;
  cfg.utterances_per_scene = 6;
  cfg.tokens_per_utterance = 7;
  cfg.seed = 9;
  Corpus c = synth_corpus(cfg);
  Vocabulary v = build_vocab(c);

  auto golds = gold_mentions(c);
  std::set<std::string> gold_ids;
  for (const auto& g : golds) gold_ids.insert(g.mention_id);

  Rng rng(4);
  auto batches = chunk_and_batch(c, v, 3, 11, rng);  // small chunks force splits

  std::set<std::string> seen_ids;
  std::map<std::string, std::size_t> tokens_per_scene;
  for (const auto& b : batches) {
    for (const auto& ch : b.chunks) {
      tokens_per_scene[ch.scene_id] += ch.true_len;
      for (const auto& m : ch.mentions) {
        CHECK(ch.mask[m.position] == 1);
        CHECK(seen_ids.insert(m.mention_id).second);  // exactly one chunk each
        CHECK(m.gold_entity == v.entity_index(m.gold_entity_id));
      }
    }
  }
  CHECK(seen_ids == gold_ids);
  for (const auto& scene : c.scenes) {
    std::size_t expect = 0;
    for (const auto& u : scene.utterances) expect += u.tokens.size();
    CHECK(tokens_per_scene[scene.id] == expect);
  }
}

TEST_CASE("a span straddling a boundary shifts the cut to the span start") {
  Corpus c;
  Scene s;
  s.id = "s";
  Utterance u;
  u.speakers.push_back("a");
  for (int i = 0; i < 4; ++i) u.tokens.push_back(Token{"w", {}, ""});
  u.tokens.push_back(Token{"mister", MentionMark{"9", 'B'}, ""});
  u.tokens.push_back(Token{"big", MentionMark{"9", 'I'}, ""});
  u.tokens.push_back(Token{"shot", MentionMark{"9", 'E'}, "NNP"});
  s.utterances.push_back(std::move(u));
  c.scenes.push_back(std::move(s));
  Vocabulary v = build_vocab(c);

  // chunk_len 5 would cut after "mister"; the cut moves back to position 4
  auto chunks = chunk_scene(c.scenes[0], v, 5);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].true_len == 4);
  CHECK(chunks[1].true_len == 3);
  REQUIRE(chunks[1].mentions.size() == 1);
  CHECK(chunks[1].mentions[0].position == 2);

  // a span longer than chunk_len cannot be placed
  CHECK_THROWS_AS(chunk_scene(c.scenes[0], v, 2), DataError);
}

TEST_CASE("padding fills to the longest chunk in the batch with masked zeros") {
  Corpus c;
  for (std::size_t tokens : {5u, 9u}) {
    Scene s;
    s.id = "s" + std::to_string(tokens);
    Utterance u;
    u.speakers.push_back("a");
    for (std::size_t i = 0; i < tokens; ++i) u.tokens.push_back(Token{"w", {}, ""});
    s.utterances.push_back(std::move(u));
    c.scenes.push_back(std::move(s));
  }
  Vocabulary v = build_vocab(c);
  Rng rng(1);
  auto batches = chunk_and_batch(c, v, 24, 757, rng, /*shuffle=*/false);
  REQUIRE(batches.size() == 1);
  REQUIRE(batches[0].chunks.size() == 2);
  for (const auto& ch : batches[0].chunks) {
    CHECK(ch.token_ids.size() == 9);
    CHECK(ch.mask.size() == 9);
    std::size_t real_count = 0;
    for (std::size_t i = 0; i < ch.mask.size(); ++i) {
      if (ch.mask[i]) {
        ++real_count;
        CHECK(i < ch.true_len);
      } else {
        CHECK(ch.speakers[i].empty());
      }
    }
    CHECK(real_count == ch.true_len);
  }
}

TEST_CASE("epoch shuffling is seed-deterministic and epochs differ") {
  SynthConfig cfg;
  cfg.scenes = 8;
  cfg.seed = 3;
  Corpus c = synth_corpus(cfg);
  Vocabulary v = build_vocab(c);
  auto order_of = [&](Rng& rng) {
    std::vector<std::string> order;
    for (const auto& b : chunk_and_batch(c, v, 2, 757, rng)) {
      for (const auto& ch : b.chunks) order.push_back(ch.scene_id);
    }
    return order;
  };
  Rng r1(5), r2(5), r3(6);
  CHECK(order_of(r1) == order_of(r2));
  CHECK(order_of(r1) != order_of(r3));  // different seed, different epoch order
  CHECK_THROWS_AS(chunk_and_batch(c, v, 0, 757, r1), ConfigError);
  CHECK_THROWS_AS(chunk_and_batch(c, v, 2, 0, r1), ConfigError);
}
