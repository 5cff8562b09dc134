#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "entlib/common.hpp"
#include "entlib/digest.hpp"

// Dialogue corpus data model and its TSV serialization.
//
// File format (UTF-8, one token per line):
//   #scene <id>                       before each scene
//   #speakers <name>[,<name>...]      before each utterance
//   token_text TAB mention TAB tag    tag column optional
//   (blank line after each utterance)
// The mention field is `-`, or B:<id> / I:<id> / E:<id> marking begin, inside,
// and end of a mention span; single-token mentions use E:. Resolution happens
// at the span-final (E) token.

namespace entlib {

struct MentionMark {
  std::string entity_id;
  char kind = 'E';  // 'B', 'I', or 'E'
  bool span_final() const { return kind == 'E'; }
};

struct Token {
  std::string text;
  std::optional<MentionMark> mention;
  std::string category;  // e.g. PRP, NNP; empty when untagged
};

struct Utterance {
  std::vector<std::string> speakers;
  std::vector<Token> tokens;
};

struct Scene {
  std::string id;
  std::vector<Utterance> utterances;
};

struct Corpus {
  std::vector<Scene> scenes;
  std::string source_path;
  bool empty() const { return scenes.empty(); }
};

// One resolvable mention: identified by the position of its span-final token.
struct GoldMention {
  std::string mention_id;  // "<scene_id>:<utterance_index>:<token_index>"
  std::string entity_id;
  std::string category;  // span-final token's tag, may be empty
  std::size_t scene = 0, utterance = 0, token = 0;
};

inline std::string make_mention_id(const std::string& scene_id, std::size_t utt, std::size_t tok) {
  return scene_id + ":" + std::to_string(utt) + ":" + std::to_string(tok);
}

inline std::vector<GoldMention> gold_mentions(const Corpus& corpus) {
  std::vector<GoldMention> out;
  for (std::size_t s = 0; s < corpus.scenes.size(); ++s) {
    const Scene& scene = corpus.scenes[s];
    for (std::size_t u = 0; u < scene.utterances.size(); ++u) {
      const auto& tokens = scene.utterances[u].tokens;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t].mention && tokens[t].mention->span_final()) {
          out.push_back(GoldMention{make_mention_id(scene.id, u, t), tokens[t].mention->entity_id,
                                    tokens[t].category, s, u, t});
        }
      }
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

struct LineContext {
  const std::string& name;
  std::size_t line = 0;
  std::string where() const { return name + ":" + std::to_string(line); }
};

[[noreturn]] inline void parse_fail(const LineContext& ctx, const std::string& msg) {
  throw ParseError(ctx.where() + ": " + msg);
}

[[noreturn]] inline void data_fail(const LineContext& ctx, const std::string& msg) {
  throw DataError(ctx.where() + ": " + msg);
}

}  // namespace detail

inline Corpus parse_corpus_text(const std::string& text, const std::string& name) {
  Corpus corpus;
  corpus.source_path = name;
  detail::LineContext ctx{name};

  Scene* scene = nullptr;
  Utterance* utterance = nullptr;
  std::optional<std::string> open_span;  // entity id of an unfinished mention span
  std::set<std::string> seen_scene_ids;

  auto close_utterance = [&]() {
    if (utterance && open_span) {
      detail::data_fail(ctx, "unterminated mention span for entity '" + *open_span + "'");
    }
    utterance = nullptr;
  };

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++ctx.line;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (line.empty()) {
      close_utterance();
      continue;
    }
    if (line.rfind("#scene ", 0) == 0) {
      close_utterance();
      std::string id = line.substr(7);
      if (id.empty()) detail::parse_fail(ctx, "empty scene id");
      if (!seen_scene_ids.insert(id).second) {
        detail::data_fail(ctx, "duplicate scene id '" + id + "'");
      }
      corpus.scenes.push_back(Scene{id, {}});
      scene = &corpus.scenes.back();
      continue;
    }
    if (line.rfind("#speakers ", 0) == 0) {
      close_utterance();
      if (!scene) detail::parse_fail(ctx, "#speakers before any #scene");
      auto names = detail::split(line.substr(10), ',');
      for (const auto& n : names) {
        if (n.empty()) detail::parse_fail(ctx, "empty speaker name");
      }
      scene->utterances.push_back(Utterance{names, {}});
      utterance = &scene->utterances.back();
      continue;
    }
    if (line[0] == '#') detail::parse_fail(ctx, "unknown directive: " + line);

    // Token line.
    if (!utterance) detail::parse_fail(ctx, "token line outside an utterance");
    auto fields = detail::split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      detail::parse_fail(ctx, "expected 2 or 3 tab-separated fields, got " +
                                  std::to_string(fields.size()));
    }
    if (fields[0].empty()) detail::parse_fail(ctx, "empty token text");
    if (fields.size() == 3 && fields[2].empty()) {
      detail::parse_fail(ctx, "empty category tag column");
    }

    Token token;
    token.text = fields[0];
    if (fields.size() == 3) token.category = fields[2];

    const std::string& mf = fields[1];
    if (mf == "-") {
      if (open_span) detail::data_fail(ctx, "mention span interrupted by non-mention token");
    } else {
      if (mf.size() < 3 || (mf[0] != 'B' && mf[0] != 'I' && mf[0] != 'E') || mf[1] != ':') {
        detail::parse_fail(ctx, "malformed mention field '" + mf + "'");
      }
      const char kind = mf[0];
      const std::string id = mf.substr(2);
      if (kind == 'B') {
        if (open_span) detail::data_fail(ctx, "overlapping mention spans");
        open_span = id;
      } else if (kind == 'I') {
        if (!open_span) detail::data_fail(ctx, "I: mark without a preceding B:");
        if (*open_span != id) detail::data_fail(ctx, "span entity changed mid-span");
      } else {  // 'E'
        if (open_span) {
          if (*open_span != id) detail::data_fail(ctx, "span entity changed mid-span");
          open_span.reset();
        }
        // bare E: is a single-token mention
      }
      token.mention = MentionMark{id, kind};
    }
    utterance->tokens.push_back(std::move(token));
  }
  ++ctx.line;
  close_utterance();
  return corpus;
}

inline Corpus parse_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  Corpus c = parse_corpus_text(ss.str(), path);
  return c;
}

inline void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  for (const Scene& scene : corpus.scenes) {
    out << "#scene " << scene.id << "\n";
    for (const Utterance& utt : scene.utterances) {
      out << "#speakers ";
      for (std::size_t i = 0; i < utt.speakers.size(); ++i) {
        out << (i ? "," : "") << utt.speakers[i];
      }
      out << "\n";
      for (const Token& t : utt.tokens) {
        out << t.text << '\t';
        if (t.mention) {
          out << t.mention->kind << ':' << t.mention->entity_id;
        } else {
          out << '-';
        }
        if (!t.category.empty()) out << '\t' << t.category;
        out << "\n";
      }
      out << "\n";
    }
  }
}

inline std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream ss;
  serialize_corpus(corpus, ss);
  return ss.str();
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file: " + path);
  serialize_corpus(corpus, out);
}

// Bidirectional token / speaker / entity index maps. Token and speaker spaces
// reserve index 0 for the unknown symbol; the entity space has no unknown:
// entities absent from the map resolve to kUnseenEntity and are handled by
// evaluation only.
class Vocabulary {
 public:
  static constexpr int kUnkIndex = 0;
  static constexpr int kUnseenEntity = -1;
  static const std::string& unk_symbol() {
    static const std::string s = "<unk>";
    return s;
  }

  Vocabulary() {
    tokens_.push_back(unk_symbol());
    speakers_.push_back(unk_symbol());
    reindex();
  }

  static Vocabulary from_lists(std::vector<std::string> tokens, std::vector<std::string> speakers,
                               std::vector<std::string> entities) {
    Vocabulary v;
    if (tokens.empty() || tokens[0] != unk_symbol() || speakers.empty() ||
        speakers[0] != unk_symbol()) {
      throw DataError("vocabulary lists must reserve index 0 for " + unk_symbol());
    }
    v.tokens_ = std::move(tokens);
    v.speakers_ = std::move(speakers);
    v.entities_ = std::move(entities);
    v.reindex();
    return v;
  }

  int token_index(const std::string& s) const {
    auto it = token_idx_.find(s);
    return it == token_idx_.end() ? kUnkIndex : it->second;
  }
  int speaker_index(const std::string& s) const {
    auto it = speaker_idx_.find(s);
    return it == speaker_idx_.end() ? kUnkIndex : it->second;
  }
  int entity_index(const std::string& s) const {
    auto it = entity_idx_.find(s);
    return it == entity_idx_.end() ? kUnseenEntity : it->second;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& speakers() const { return speakers_; }
  const std::vector<std::string>& entities() const { return entities_; }

  std::size_t token_count() const { return tokens_.size(); }
  std::size_t speaker_count() const { return speakers_.size(); }
  std::size_t entity_count() const { return entities_.size(); }  // N

  const std::string& entity_name(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= entities_.size()) {
      throw IndexError("entity index " + std::to_string(index) + " out of range [0," +
                       std::to_string(entities_.size()) + ")");
    }
    return entities_[static_cast<std::size_t>(index)];
  }

  std::string tokens_digest() const { return digest_name_list(tokens_); }
  std::string speakers_digest() const { return digest_name_list(speakers_); }
  std::string entities_digest() const { return digest_name_list(entities_); }
  // Single digest over all three sections.
  std::string digest() const {
    return sha256_hex(tokens_digest() + speakers_digest() + entities_digest());
  }

 private:
  friend Vocabulary build_vocab(const Corpus&, int);

  void reindex() {
    token_idx_.clear();
    speaker_idx_.clear();
    entity_idx_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      token_idx_.emplace(tokens_[i], static_cast<int>(i));
    }
    for (std::size_t i = 0; i < speakers_.size(); ++i) {
      speaker_idx_.emplace(speakers_[i], static_cast<int>(i));
    }
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      entity_idx_.emplace(entities_[i], static_cast<int>(i));
    }
  }

  std::vector<std::string> tokens_, speakers_, entities_;
  std::unordered_map<std::string, int> token_idx_, speaker_idx_, entity_idx_;
};

// Builds the index maps by first occurrence, scene by scene in file order.
// Token types seen fewer than min_token_count times map to the unknown index.
inline Vocabulary build_vocab(const Corpus& corpus, int min_token_count = 1) {
  if (corpus.empty()) throw DataError("build_vocab requires a non-empty corpus");
  std::unordered_map<std::string, int> counts;
  for (const Scene& scene : corpus.scenes) {
    for (const Utterance& utt : scene.utterances) {
      for (const Token& t : utt.tokens) ++counts[t.text];
    }
  }
  Vocabulary v;
  auto add_unique = [](std::vector<std::string>& list, std::unordered_map<std::string, int>& idx,
                       const std::string& name) {
    if (idx.emplace(name, static_cast<int>(list.size())).second) list.push_back(name);
  };
  for (const Scene& scene : corpus.scenes) {
    for (const Utterance& utt : scene.utterances) {
      for (const std::string& sp : utt.speakers) add_unique(v.speakers_, v.speaker_idx_, sp);
      for (const Token& t : utt.tokens) {
        if (counts[t.text] >= min_token_count) add_unique(v.tokens_, v.token_idx_, t.text);
        if (t.mention) add_unique(v.entities_, v.entity_idx_, t.mention->entity_id);
      }
    }
  }
  return v;
}

// Mention-count distributions over category tags and entities (untagged
// mentions fall under "other").
struct CorpusStats {
  std::size_t scene_count = 0;
  std::size_t utterance_count = 0;
  std::size_t token_count = 0;
  std::size_t mention_count = 0;
  std::map<std::string, std::size_t> mentions_by_category;
  std::map<std::string, std::size_t> mentions_by_entity;
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.scene_count = corpus.scenes.size();
  for (const Scene& scene : corpus.scenes) {
    st.utterance_count += scene.utterances.size();
    for (const Utterance& utt : scene.utterances) {
      st.token_count += utt.tokens.size();
      for (const Token& t : utt.tokens) {
        if (t.mention && t.mention->span_final()) {
          ++st.mention_count;
          ++st.mentions_by_category[t.category.empty() ? "other" : t.category];
          ++st.mentions_by_entity[t.mention->entity_id];
        }
      }
    }
  }
  return st;
}

}  // namespace entlib
