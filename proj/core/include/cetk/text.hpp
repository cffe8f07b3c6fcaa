#pragma once

// Tokenization, sentence splitting and the sentence-level filters that gate
// the pipeline. Offsets are UTF-8 byte offsets into the sentence text, so a
// token's text is always text.substr(start, end - start).

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cetk {

struct Tweet {
  std::string id;
  std::string text;
  std::optional<std::string> created_at;
  std::optional<std::string> lang;
};

struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  bool is_word = false;

  friend bool operator==(const Token&, const Token&) = default;
};

enum class SentenceStatus { Kept, DroppedTooShort, DroppedQuestion };

std::string_view status_name(SentenceStatus status);
SentenceStatus parse_status(std::string_view name);

/// Sentences with fewer words than this are dropped for lack of context.
inline constexpr std::size_t kMinSentenceWords = 6;

struct Sentence {
  std::string id;
  std::string tweet_id;
  std::string text;
  std::vector<Token> tokens;
  SentenceStatus status = SentenceStatus::Kept;

  std::size_t word_count() const;
  std::vector<std::string> token_texts() const;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

std::vector<Token> tokenize(std::string_view text);

std::vector<std::string> split_sentences(std::string_view text);

SentenceStatus filter_sentence(const Sentence& sentence);

/// Tokenizes `text` and fills in the filter status.
Sentence make_sentence(std::string id, std::string tweet_id, std::string text);

/// Optional pre-filter applied to whole tweets before sentence splitting.
/// An empty function accepts everything.
using TweetFilter = std::function<bool(const Tweet&)>;

/// Splits a tweet into sentences with ids "<tweet id>:<index>". Returns an
/// empty list when the pre-filter rejects the tweet.
std::vector<Sentence> process_tweet(const Tweet& tweet,
                                    const TweetFilter& prefilter = {});

/// Parses one corpus line. Throws Error{ParseError, line_no} on bad JSON,
/// missing fields, empty id or blank text.
Tweet parse_tweet_line(std::string_view line, std::size_t line_no);

/// Reads a whole JSONL corpus; blank lines are skipped, duplicate ids are a
/// ParseError on the line of the second occurrence.
std::vector<Tweet> read_tweets(std::istream& in);

std::string tweet_to_json(const Tweet& tweet);

std::string sentence_to_json(const Sentence& sentence);
Sentence sentence_from_json(std::string_view json);

// UTF-8 helpers shared by the feature extractors.
std::size_t utf8_length(std::string_view text);
std::string ascii_lower(std::string_view text);
bool is_word_codepoint(char32_t cp);

}  // namespace cetk
