#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "entlib/common.hpp"
#include "entlib/corpus.hpp"

// Synthetic dialogue generator for desk-scale experiments. Gold links hold by
// construction: "I" refers to the current speaker, "you" to the previous
// utterance's speaker, and each entity has a fixed name token. An optional
// long-tail mode concentrates speaking turns and name mentions on a few head
// entities so rare-entity behavior can be probed.

namespace entlib {

struct SynthConfig {
  std::size_t entities = 6;
  std::size_t scenes = 10;
  std::size_t utterances_per_scene = 5;
  std::size_t tokens_per_utterance = 8;
  double p_first_person = 0.15;   // "I" mention of the current speaker
  double p_second_person = 0.08;  // "you" mention of the previous speaker
  double p_name = 0.12;           // name-token mention of a drawn entity
  double p_multiword = 0.1;       // fraction of name mentions emitted as 2-token spans
  std::size_t head_entities = 0;  // 0 disables the long tail
  double head_share = 0.8;        // probability mass on head entities
  std::size_t min_mentions_per_entity = 3;
  std::uint64_t seed = 1;

  void validate() const {
    if (entities < 1 || scenes < 1 || utterances_per_scene < 1 || tokens_per_utterance < 1) {
      throw ConfigError("synth: entities, scenes, utterances, and tokens must all be >= 1");
    }
    if (p_first_person < 0 || p_second_person < 0 || p_name < 0 || p_multiword < 0 ||
        p_multiword > 1 || p_first_person + p_second_person + p_name > 1.0) {
      throw ConfigError("synth: mention probabilities must be non-negative and sum to <= 1");
    }
    if (head_entities > entities) throw ConfigError("synth: head_entities exceeds entities");
    if (head_share < 0 || head_share > 1) throw ConfigError("synth: head_share must be in [0,1]");
  }

  bool set(const std::string& key, const std::string& value) {
    auto as_size = [&]() { return static_cast<std::size_t>(std::stoull(value)); };
    auto as_double = [&]() { return std::stod(value); };
    if (key == "entities") entities = as_size();
    else if (key == "scenes") scenes = as_size();
    else if (key == "utterances_per_scene") utterances_per_scene = as_size();
    else if (key == "tokens_per_utterance") tokens_per_utterance = as_size();
    else if (key == "p_first_person") p_first_person = as_double();
    else if (key == "p_second_person") p_second_person = as_double();
    else if (key == "p_name") p_name = as_double();
    else if (key == "p_multiword") p_multiword = as_double();
    else if (key == "head_entities") head_entities = as_size();
    else if (key == "head_share") head_share = as_double();
    else if (key == "min_mentions_per_entity") min_mentions_per_entity = as_size();
    else if (key == "seed") seed = std::stoull(value);
    else return false;
    return true;
  }

  // Flat "key = value" text file; '#' starts a comment line.
  static SynthConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open synth config: " + path);
    SynthConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
      const char* ws = " \t";
      const auto a = s.find_first_not_of(ws);
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(ws);
      return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
      }
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      try {
        if (!cfg.set(key, value)) {
          throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
      } catch (const std::invalid_argument&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
      }
    }
    return cfg;
  }
};

inline std::string synth_entity_id(std::size_t i) { return "e" + std::to_string(i); }
inline std::string synth_speaker_name(std::size_t i) { return "p" + std::to_string(i); }
inline std::string synth_name_token(std::size_t i) { return "name" + std::to_string(i); }

namespace detail {

inline std::size_t draw_entity(const SynthConfig& cfg, Rng& rng) {
  if (cfg.head_entities == 0 || cfg.head_entities == cfg.entities) {
    return uniform_index(rng, cfg.entities);
  }
  if (uniform01(rng) < cfg.head_share) return uniform_index(rng, cfg.head_entities);
  return cfg.head_entities + uniform_index(rng, cfg.entities - cfg.head_entities);
}

}  // namespace detail

inline Corpus synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  static const std::vector<std::string> fillers = {"well", "so",    "the",  "a",    "talk",
                                                   "see",  "think", "know", "yeah", "right",
                                                   "come", "go",    "now",  "later"};
  Rng rng(mix_seed(cfg.seed, 0x73796e7468ull));
  Corpus corpus;
  corpus.source_path = "<synthetic>";
  std::vector<std::size_t> mention_counts(cfg.entities, 0);

  for (std::size_t s = 0; s < cfg.scenes; ++s) {
    Scene scene;
    scene.id = "synth" + std::to_string(s);
    std::size_t prev_speaker = cfg.entities;  // sentinel: no previous utterance
    for (std::size_t u = 0; u < cfg.utterances_per_scene; ++u) {
      std::size_t speaker = detail::draw_entity(cfg, rng);
      for (int tries = 0; tries < 8 && cfg.entities > 1 && speaker == prev_speaker; ++tries) {
        speaker = detail::draw_entity(cfg, rng);
      }
      Utterance utt;
      utt.speakers.push_back(synth_speaker_name(speaker));
      for (std::size_t t = 0; t < cfg.tokens_per_utterance; ++t) {
        const double r = uniform01(rng);
        if (r < cfg.p_first_person) {
          utt.tokens.push_back(
              Token{"I", MentionMark{synth_entity_id(speaker), 'E'}, "PRP"});
          ++mention_counts[speaker];
        } else if (r < cfg.p_first_person + cfg.p_second_person && prev_speaker < cfg.entities) {
          utt.tokens.push_back(
              Token{"you", MentionMark{synth_entity_id(prev_speaker), 'E'}, "PRP"});
          ++mention_counts[prev_speaker];
        } else if (r < cfg.p_first_person + cfg.p_second_person + cfg.p_name) {
          const std::size_t who = detail::draw_entity(cfg, rng);
          const std::string id = synth_entity_id(who);
          if (uniform01(rng) < cfg.p_multiword) {
            utt.tokens.push_back(Token{"mister", MentionMark{id, 'B'}, ""});
            utt.tokens.push_back(Token{synth_name_token(who), MentionMark{id, 'E'}, "NNP"});
          } else {
            utt.tokens.push_back(Token{synth_name_token(who), MentionMark{id, 'E'}, "NNP"});
          }
          ++mention_counts[who];
        } else {
          utt.tokens.push_back(Token{fillers[uniform_index(rng, fillers.size())], {}, ""});
        }
      }
      scene.utterances.push_back(std::move(utt));
      prev_speaker = speaker;
    }
    corpus.scenes.push_back(std::move(scene));
  }

  // Guarantee the per-entity mention floor by appending name-mention
  // utterances to the last scene (no pronouns, so construction rules hold).
  if (cfg.min_mentions_per_entity > 0) {
    Scene& last = corpus.scenes.back();
    for (std::size_t who = 0; who < cfg.entities; ++who) {
      while (mention_counts[who] < cfg.min_mentions_per_entity) {
        Utterance utt;
        utt.speakers.push_back(synth_speaker_name((who + 1) % cfg.entities));
        utt.tokens.push_back(Token{"see", {}, ""});
        utt.tokens.push_back(
            Token{synth_name_token(who), MentionMark{synth_entity_id(who), 'E'}, "NNP"});
        utt.tokens.push_back(Token{"there", {}, ""});
        last.utterances.push_back(std::move(utt));
        ++mention_counts[who];
      }
    }
  }
  return corpus;
}

}  // namespace entlib
