#include "cetk/text.hpp"

#include <algorithm>
#include <istream>
#include <unordered_set>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk {

using json = nlohmann::json;

namespace {

struct Decoded {
  char32_t cp;
  std::size_t len;
};

Decoded decode_at(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (pos + len > s.size()) return {0xFFFD, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

bool is_space(char32_t cp) {
  switch (cp) {
    case ' ': case '\t': case '\n': case '\r': case '\v': case '\f':
    case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_regional_indicator(char32_t cp) { return cp >= 0x1F1E6 && cp <= 0x1F1FF; }

bool is_emoji_base(char32_t cp) {
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return true;
  if (cp >= 0x2600 && cp <= 0x27BF) return true;
  if (cp >= 0x2300 && cp <= 0x23FF) return true;
  if (cp >= 0x2B00 && cp <= 0x2BFF) return true;
  switch (cp) {
    case 0x00A9: case 0x00AE: case 0x203C: case 0x2049: case 0x2122:
    case 0x2139: case 0x3030: case 0x303D: case 0x3297: case 0x3299:
      return true;
    default:
      return false;
  }
}

bool is_emoji_modifier(char32_t cp) {
  return cp == 0xFE0E || cp == 0xFE0F || cp == 0x20E3 ||
         (cp >= 0x1F3FB && cp <= 0x1F3FF) || (cp >= 0xE0020 && cp <= 0xE007F);
}

constexpr char32_t kZeroWidthJoiner = 0x200D;

bool is_ascii_alnum(char32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
         (cp >= 'A' && cp <= 'Z');
}

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    char c = s[pos + k];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[k]) return false;
  }
  return true;
}

bool is_url_trailing(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':':
    case '\'': case '"': case ')': case ']': case '}':
      return true;
    default:
      return false;
  }
}

// Returns the end of a URL starting at `pos`, or `pos` if there is none.
std::size_t url_end_at(std::string_view s, std::size_t pos) {
  std::size_t prefix = 0;
  if (starts_with_ci(s, pos, "https://")) {
    prefix = 8;
  } else if (starts_with_ci(s, pos, "http://")) {
    prefix = 7;
  } else if (starts_with_ci(s, pos, "www.")) {
    prefix = 4;
  } else {
    return pos;
  }
  std::size_t end = pos;
  while (end < s.size()) {
    const Decoded d = decode_at(s, end);
    if (is_space(d.cp)) break;
    end += d.len;
  }
  while (end > pos + prefix && is_url_trailing(s[end - 1])) --end;
  if (end == pos + prefix) return pos;
  return end;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e) {
    const Decoded d = decode_at(s, b);
    if (!is_space(d.cp)) break;
    b += d.len;
  }
  while (e > b) {
    // Step back to the start of the last codepoint.
    std::size_t p = e - 1;
    while (p > b && (static_cast<unsigned char>(s[p]) & 0xC0) == 0x80) --p;
    if (!is_space(decode_at(s, p).cp)) break;
    e = p;
  }
  return s.substr(b, e - b);
}

bool contains_alnum(std::string_view s) {
  for (std::size_t pos = 0; pos < s.size();) {
    const Decoded d = decode_at(s, pos);
    if (d.cp != '_' && is_word_codepoint(d.cp)) return true;
    pos += d.len;
  }
  return false;
}

Token make_token(std::string_view text, std::size_t start, std::size_t end) {
  Token t;
  t.text = std::string(text.substr(start, end - start));
  t.start = start;
  t.end = end;
  t.is_word = contains_alnum(t.text);
  return t;
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error(ErrorCode::ParseError, std::string("missing string field '") + key + "'",
                line_no);
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* key,
                                           std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "' must be a string",
                line_no);
  }
  return it->get<std::string>();
}

}  // namespace

bool is_word_codepoint(char32_t cp) {
  if (cp < 0x80) return is_ascii_alnum(cp);
  if (is_space(cp) || is_emoji_base(cp) || is_emoji_modifier(cp)) return false;
  if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xE000 && cp <= 0xF8FF) return false;
  if (cp >= 0xFE00 && cp <= 0xFE6F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0xFFF0 && cp <= 0xFFFF) return false;
  if (cp >= 0xE0000) return false;
  return true;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < text.size(); ++n) pos += decode_at(text, pos).len;
  return n;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view status_name(SentenceStatus status) {
  switch (status) {
    case SentenceStatus::Kept: return "kept";
    case SentenceStatus::DroppedTooShort: return "dropped_too_short";
    case SentenceStatus::DroppedQuestion: return "dropped_question";
  }
  return "kept";
}

SentenceStatus parse_status(std::string_view name) {
  if (name == "kept") return SentenceStatus::Kept;
  if (name == "dropped_too_short") return SentenceStatus::DroppedTooShort;
  if (name == "dropped_question") return SentenceStatus::DroppedQuestion;
  throw Error(ErrorCode::SchemaError, "unknown sentence status '" + std::string(name) + "'");
}

std::size_t Sentence::word_count() const {
  return static_cast<std::size_t>(
      std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return t.is_word; }));
}

std::vector<std::string> Sentence::token_texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  const std::size_t n = text.size();
  while (pos < n) {
    const Decoded d = decode_at(text, pos);
    if (is_space(d.cp)) {
      pos += d.len;
      continue;
    }

    if (const std::size_t url_end = url_end_at(text, pos); url_end > pos) {
      tokens.push_back(make_token(text, pos, url_end));
      pos = url_end;
      continue;
    }

    if ((d.cp == '#' || d.cp == '@') && pos + 1 < n) {
      const Decoded next = decode_at(text, pos + 1);
      if (next.cp == '_' || is_word_codepoint(next.cp)) {
        std::size_t end = pos + 1;
        while (end < n) {
          const Decoded c = decode_at(text, end);
          if (c.cp != '_' && !is_word_codepoint(c.cp)) break;
          end += c.len;
        }
        tokens.push_back(make_token(text, pos, end));
        pos = end;
        continue;
      }
    }

    if (is_word_codepoint(d.cp)) {
      std::size_t end = pos;
      while (end < n) {
        const Decoded c = decode_at(text, end);
        if (!is_word_codepoint(c.cp)) break;
        end += c.len;
      }
      tokens.push_back(make_token(text, pos, end));
      pos = end;
      continue;
    }

    if (is_regional_indicator(d.cp)) {
      std::size_t end = pos + d.len;
      if (end < n && is_regional_indicator(decode_at(text, end).cp)) {
        end += decode_at(text, end).len;
      }
      tokens.push_back(make_token(text, pos, end));
      pos = end;
      continue;
    }

    if (is_emoji_base(d.cp)) {
      std::size_t end = pos + d.len;
      while (end < n) {
        const Decoded c = decode_at(text, end);
        if (is_emoji_modifier(c.cp)) {
          end += c.len;
        } else if (c.cp == kZeroWidthJoiner && end + c.len < n &&
                   is_emoji_base(decode_at(text, end + c.len).cp)) {
          end += c.len;
          end += decode_at(text, end).len;
        } else {
          break;
        }
      }
      tokens.push_back(make_token(text, pos, end));
      pos = end;
      continue;
    }

    tokens.push_back(make_token(text, pos, pos + d.len));
    pos += d.len;
  }
  return tokens;
}

std::vector<std::string> split_sentences(std::string_view text) {
  const std::size_t n = text.size();

  // Byte mask of positions covered by a URL; terminators there never split.
  std::vector<bool> in_url(n, false);
  for (std::size_t pos = 0; pos < n;) {
    const bool at_boundary = pos == 0 || is_space(decode_at(text, pos - 1).cp) ||
                             (static_cast<unsigned char>(text[pos - 1]) < 0x80 &&
                              !is_ascii_alnum(static_cast<unsigned char>(text[pos - 1])));
    if (at_boundary) {
      const std::size_t end = url_end_at(text, pos);
      if (end > pos) {
        std::fill(in_url.begin() + static_cast<std::ptrdiff_t>(pos),
                  in_url.begin() + static_cast<std::ptrdiff_t>(end), true);
        pos = end;
        continue;
      }
    }
    pos += decode_at(text, pos).len;
  }

  std::vector<std::string> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    const std::string_view piece = trim(text.substr(b, e - b));
    if (!piece.empty()) out.emplace_back(piece);
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    if (is_terminator(text[i]) && !in_url[i]) {
      std::size_t j = i;
      while (j < n && is_terminator(text[j]) && !in_url[j]) ++j;
      if (j == n || is_space(decode_at(text, j).cp)) {
        emit(start, j);
        start = j;
      }
      i = j;
      continue;
    }
    ++i;
  }
  if (start < n) emit(start, n);
  return out;
}

SentenceStatus filter_sentence(const Sentence& sentence) {
  const std::string_view body = trim(sentence.text);
  if (!body.empty() && body.back() == '?') return SentenceStatus::DroppedQuestion;
  if (sentence.word_count() < kMinSentenceWords) return SentenceStatus::DroppedTooShort;
  return SentenceStatus::Kept;
}

Sentence make_sentence(std::string id, std::string tweet_id, std::string text) {
  Sentence s;
  s.id = std::move(id);
  s.tweet_id = std::move(tweet_id);
  s.text = std::move(text);
  s.tokens = tokenize(s.text);
  s.status = filter_sentence(s);
  return s;
}

std::vector<Sentence> process_tweet(const Tweet& tweet, const TweetFilter& prefilter) {
  if (prefilter && !prefilter(tweet)) return {};
  std::vector<Sentence> out;
  std::size_t index = 0;
  for (auto& piece : split_sentences(tweet.text)) {
    out.push_back(make_sentence(tweet.id + ":" + std::to_string(index++), tweet.id,
                                std::move(piece)));
  }
  return out;
}

Tweet parse_tweet_line(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what(), line_no);
  }
  if (!obj.is_object()) throw Error(ErrorCode::ParseError, "expected a JSON object", line_no);
  Tweet t;
  t.id = require_string(obj, "id", line_no);
  t.text = require_string(obj, "text", line_no);
  t.created_at = optional_string(obj, "created_at", line_no);
  t.lang = optional_string(obj, "lang", line_no);
  if (t.id.empty()) throw Error(ErrorCode::ParseError, "empty tweet id", line_no);
  if (trim(t.text).empty()) throw Error(ErrorCode::ParseError, "blank tweet text", line_no);
  return t;
}

std::vector<Tweet> read_tweets(std::istream& in) {
  std::vector<Tweet> tweets;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Tweet t = parse_tweet_line(line, line_no);
    if (!seen.insert(t.id).second) {
      throw Error(ErrorCode::ParseError, "duplicate tweet id '" + t.id + "'", line_no);
    }
    tweets.push_back(std::move(t));
  }
  return tweets;
}

std::string tweet_to_json(const Tweet& tweet) {
  json obj = {{"id", tweet.id}, {"text", tweet.text}};
  if (tweet.created_at) obj["created_at"] = *tweet.created_at;
  if (tweet.lang) obj["lang"] = *tweet.lang;
  return obj.dump();
}

std::string sentence_to_json(const Sentence& sentence) {
  json offsets = json::array();
  for (const auto& t : sentence.tokens) offsets.push_back({t.start, t.end});
  json obj = {{"id", sentence.id},
              {"tweet_id", sentence.tweet_id},
              {"text", sentence.text},
              {"status", status_name(sentence.status)},
              {"tokens", offsets}};
  return obj.dump();
}

Sentence sentence_from_json(std::string_view text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
  try {
    Sentence s;
    s.id = obj.at("id").get<std::string>();
    s.tweet_id = obj.at("tweet_id").get<std::string>();
    s.text = obj.at("text").get<std::string>();
    s.status = parse_status(obj.at("status").get<std::string>());
    std::size_t prev_end = 0;
    for (const auto& pair : obj.at("tokens")) {
      const auto start = pair.at(0).get<std::size_t>();
      const auto end = pair.at(1).get<std::size_t>();
      if (start >= end || end > s.text.size() || start < prev_end) {
        throw Error(ErrorCode::SchemaError, "invalid token offsets in sentence " + s.id);
      }
      s.tokens.push_back(make_token(s.text, start, end));
      prev_end = end;
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

}  // namespace cetk
