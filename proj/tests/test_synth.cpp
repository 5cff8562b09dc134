#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <string>

#include "entlib/corpus.hpp"
#include "entlib/synth.hpp"
#include "testutil.hpp"

using namespace entlib;

TEST_CASE("generation is deterministic per seed") {
  SynthConfig cfg;
  cfg.entities = 2;
  cfg.scenes = 1;
  cfg.seed = 77;
  CHECK(serialize_corpus(synth_corpus(cfg)) == serialize_corpus(synth_corpus(cfg)));
  SynthConfig other = cfg;
  other.seed = 78;
  CHECK(serialize_corpus(synth_corpus(cfg)) != serialize_corpus(synth_corpus(other)));
}

TEST_CASE("first-person mentions always refer to the current speaker") {
  SynthConfig cfg;
  cfg.entities = 5;
  cfg.scenes = 30;
  cfg.seed = 11;
  Corpus c = synth_corpus(cfg);
  std::size_t checked = 0;
  for (const auto& scene : c.scenes) {
    for (const auto& utt : scene.utterances) {
      for (const auto& tok : utt.tokens) {
        if (tok.text == "I") {
          REQUIRE(tok.mention.has_value());
          REQUIRE(utt.speakers.size() == 1);
          // speaker p<i> corresponds to entity e<i>
          CHECK("e" + utt.speakers[0].substr(1) == tok.mention->entity_id);
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("second-person mentions refer to the previous speaker") {
  SynthConfig cfg;
  cfg.entities = 4;
  cfg.scenes = 20;
  cfg.seed = 13;
  Corpus c = synth_corpus(cfg);
  std::size_t checked = 0;
  for (const auto& scene : c.scenes) {
    std::string prev_speaker;
    for (const auto& utt : scene.utterances) {
      for (const auto& tok : utt.tokens) {
        if (tok.text == "you") {
          REQUIRE(tok.mention.has_value());
          REQUIRE_FALSE(prev_speaker.empty());
          CHECK("e" + prev_speaker.substr(1) == tok.mention->entity_id);
          ++checked;
        }
      }
      prev_speaker = utt.speakers[0];
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("name tokens are fixed per entity") {
  SynthConfig cfg;
  cfg.entities = 3;
  cfg.scenes = 10;
  cfg.seed = 5;
  Corpus c = synth_corpus(cfg);
  for (const auto& scene : c.scenes) {
    for (const auto& utt : scene.utterances) {
      for (const auto& tok : utt.tokens) {
        if (tok.mention && tok.text.rfind("name", 0) == 0) {
          CHECK("e" + tok.text.substr(4) == tok.mention->entity_id);
        }
      }
    }
  }
}

TEST_CASE("200 scenes with 6 entities mention every entity at least 3 times") {
  SynthConfig cfg;
  cfg.entities = 6;
  cfg.scenes = 200;
  cfg.seed = 21;
  Corpus c = synth_corpus(cfg);
  CorpusStats st = corpus_stats(c);
  for (std::size_t i = 0; i < cfg.entities; ++i) {
    CHECK(st.mentions_by_entity.at(synth_entity_id(i)) >= 3);
  }
  // entity inventory equals the configured count
  Vocabulary v = build_vocab(c);
  CHECK(v.entity_count() == cfg.entities);
}

TEST_CASE("generated corpus parses back through the TSV round trip") {
  SynthConfig cfg;
  cfg.entities = 4;
  cfg.scenes = 6;
  cfg.seed = 31;
  cfg.p_multiword = 0.5;  // exercise B/E spans
  Corpus c = synth_corpus(cfg);
  std::string text = serialize_corpus(c);
  Corpus back = parse_corpus_text(text, "synth");
  CHECK(serialize_corpus(back) == text);
  CHECK(back.scenes.size() == cfg.scenes);
}

TEST_CASE("long-tail mode concentrates mentions on head entities") {
  SynthConfig cfg;
  cfg.entities = 20;
  cfg.head_entities = 4;
  cfg.head_share = 0.8;
  cfg.scenes = 150;
  cfg.utterances_per_scene = 5;
  cfg.tokens_per_utterance = 8;
  cfg.min_mentions_per_entity = 3;
  cfg.seed = 41;
  Corpus c = synth_corpus(cfg);
  CorpusStats st = corpus_stats(c);
  std::size_t head = 0, total = 0;
  for (const auto& [id, n] : st.mentions_by_entity) total += n;
  for (std::size_t i = 0; i < cfg.head_entities; ++i) {
    head += st.mentions_by_entity.at(synth_entity_id(i));
  }
  const double share = static_cast<double>(head) / static_cast<double>(total);
  CHECK(share > 0.65);
  CHECK(share < 0.95);
}

TEST_CASE("config file parsing and validation") {
  testutil::TempDir tmp("synth");
  testutil::write_file(tmp.file("gen.cfg"),
                       "# generator settings\n"
                       "entities = 7\n"
                       "scenes = 3\n"
                       "p_name = 0.25\n"
                       "seed = 99\n");
  SynthConfig cfg = SynthConfig::from_file(tmp.file("gen.cfg"));
  CHECK(cfg.entities == 7);
  CHECK(cfg.scenes == 3);
  CHECK(cfg.p_name == 0.25);
  CHECK(cfg.seed == 99);

  testutil::write_file(tmp.file("bad.cfg"), "bogus_key = 3\n");
  CHECK_THROWS_AS(SynthConfig::from_file(tmp.file("bad.cfg")), ConfigError);
  testutil::write_file(tmp.file("junk.cfg"), "entities\n");
  CHECK_THROWS_AS(SynthConfig::from_file(tmp.file("junk.cfg")), ParseError);

  SynthConfig invalid;
  invalid.p_name = 0.9;
  invalid.p_first_person = 0.9;
  CHECK_THROWS_AS(synth_corpus(invalid), ConfigError);
}
