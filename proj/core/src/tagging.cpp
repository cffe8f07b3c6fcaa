#include "cetk/tagging.hpp"

#include <algorithm>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk {

using json = nlohmann::json;

std::string_view tag_name(IOTag tag) {
  switch (tag) {
    case IOTag::InsideCause: return "I-C";
    case IOTag::InsideEffect: return "I-E";
    case IOTag::Outside: return "O";
  }
  return "O";
}

IOTag parse_tag(std::string_view name) {
  if (name == "I-C") return IOTag::InsideCause;
  if (name == "I-E") return IOTag::InsideEffect;
  if (name == "O") return IOTag::Outside;
  throw Error(ErrorCode::UnknownLabel, std::string(name));
}

std::vector<std::string> tag_names(std::span<const IOTag> tags) {
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (IOTag t : tags) out.emplace_back(tag_name(t));
  return out;
}

std::string_view role_name(Role role) { return role == Role::Cause ? "cause" : "effect"; }

Role parse_role(std::string_view name) {
  if (name == "cause") return Role::Cause;
  if (name == "effect") return Role::Effect;
  throw Error(ErrorCode::SchemaError, "unknown span role '" + std::string(name) + "'");
}

std::vector<IOTag> encode_io(std::size_t token_count, std::span<const Span> spans) {
  std::vector<IOTag> tags(token_count, IOTag::Outside);
  std::vector<bool> covered(token_count, false);
  for (const Span& s : spans) {
    if (s.start >= s.end || s.end > token_count) {
      throw Error(ErrorCode::OutOfBounds, "span [" + std::to_string(s.start) + ", " +
                                              std::to_string(s.end) + ") for " +
                                              std::to_string(token_count) + " tokens");
    }
  }
  for (const Span& s : spans) {
    const IOTag tag = s.role == Role::Cause ? IOTag::InsideCause : IOTag::InsideEffect;
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (covered[i]) {
        throw Error(ErrorCode::OverlappingSpans, "token " + std::to_string(i) +
                                                     " is covered by two spans");
      }
      covered[i] = true;
      tags[i] = tag;
    }
  }
  return tags;
}

std::vector<Span> decode_io(std::span<const IOTag> tags) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i] == IOTag::Outside) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j] == tags[i]) ++j;
    spans.push_back({tags[i] == IOTag::InsideCause ? Role::Cause : Role::Effect, i, j});
    i = j;
  }
  return spans;
}

std::string annotation_to_json(const AnnotationRecord& record) {
  json spans = json::array();
  for (const Span& s : record.spans) {
    spans.push_back({{"role", role_name(s.role)}, {"start", s.start}, {"end", s.end}});
  }
  json obj = {{"sentence_id", record.sentence_id},
              {"causal", record.causal},
              {"spans", std::move(spans)}};
  return obj.dump();
}

AnnotationRecord annotation_from_json(std::string_view text) {
  try {
    const json obj = json::parse(text);
    AnnotationRecord r;
    r.sentence_id = obj.at("sentence_id").get<std::string>();
    r.causal = obj.at("causal").get<bool>();
    if (auto it = obj.find("spans"); it != obj.end()) {
      for (const auto& s : *it) {
        Span span;
        span.role = parse_role(s.at("role").get<std::string>());
        span.start = s.at("start").get<std::size_t>();
        span.end = s.at("end").get<std::size_t>();
        if (span.start >= span.end) {
          throw Error(ErrorCode::SchemaError, "empty span in " + r.sentence_id);
        }
        r.spans.push_back(span);
      }
    }
    if (r.sentence_id.empty()) throw Error(ErrorCode::SchemaError, "empty sentence_id");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

}  // namespace cetk
