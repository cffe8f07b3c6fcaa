#pragma once

// IO tag alphabet and the conversions between annotated spans and per-token
// tag sequences.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cetk {

/// Canonical order I-C < I-E < O; ties are broken in this order everywhere.
enum class IOTag : int { InsideCause = 0, InsideEffect = 1, Outside = 2 };

inline constexpr std::size_t kNumTags = 3;
inline constexpr std::array<IOTag, kNumTags> kAllTags = {
    IOTag::InsideCause, IOTag::InsideEffect, IOTag::Outside};

constexpr std::size_t tag_index(IOTag tag) { return static_cast<std::size_t>(tag); }
constexpr IOTag tag_from_index(std::size_t i) { return static_cast<IOTag>(i); }

std::string_view tag_name(IOTag tag);
IOTag parse_tag(std::string_view name);
std::vector<std::string> tag_names(std::span<const IOTag> tags);

enum class Role { Cause, Effect };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

/// Half-open token range [start, end).
struct Span {
  Role role = Role::Cause;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Throws OutOfBounds for spans outside [0, token_count) or empty spans, and
/// OverlappingSpans when two spans share a token.
std::vector<IOTag> encode_io(std::size_t token_count, std::span<const Span> spans);

/// Maximal same-tag runs become spans, in start order. Adjacent spans of the
/// same role therefore merge; that loss is inherent to IO tagging.
std::vector<Span> decode_io(std::span<const IOTag> tags);

/// One line of the annotation JSONL format.
struct AnnotationRecord {
  std::string sentence_id;
  bool causal = false;
  std::vector<Span> spans;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

std::string annotation_to_json(const AnnotationRecord& record);
/// Throws SchemaError on malformed records.
AnnotationRecord annotation_from_json(std::string_view json);

}  // namespace cetk
