#pragma once

// On-disk project layout. All writes of a command are staged in memory and
// committed together through temp files and renames, so a command that fails
// leaves the store as it found it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cetk::app {

namespace files {
inline constexpr std::string_view kManifest = "manifest.json";
inline constexpr std::string_view kSentences = "sentences.jsonl";
inline constexpr std::string_view kAnnotations = "annotations.jsonl";
inline constexpr std::string_view kEvents = "al_events.jsonl";
inline constexpr std::string_view kClassifier = "models/classifier.json";
inline constexpr std::string_view kCrf = "models/crf.json";
inline constexpr std::string_view kPredictions = "predictions.jsonl";
inline constexpr std::string_view kSeeds = "seeds.jsonl";
inline constexpr std::string_view kClusters = "clusters.jsonl";
inline constexpr std::string_view kRecords = "records.jsonl";
inline constexpr std::string_view kGraph = "graph.json";
inline constexpr std::string_view kLock = ".lock";
}  // namespace files

struct Manifest {
  std::uint64_t seed = 42;
  std::string embeddings;
  std::optional<double> similarity_threshold;
  std::optional<std::size_t> min_count;

  std::string to_json() const;
  static Manifest from_json(std::string_view json);
};

/// Exclusive advisory lock on the store's lock file, held for the lifetime
/// of the object. Throws StoreLocked when another process holds it.
class StoreLock {
 public:
  explicit StoreLock(const std::filesystem::path& root);
  ~StoreLock();
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  int fd_ = -1;
};

class ProjectStore {
 public:
  explicit ProjectStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path_of(std::string_view name) const;
  bool exists(std::string_view name) const;

  std::optional<std::string> read(std::string_view name) const;
  /// Non-blank lines of a JSONL file; empty when the file is missing.
  std::vector<std::string> read_lines(std::string_view name) const;

  Manifest manifest() const;

  /// Buffers whole-file replacements until commit().
  class Transaction {
   public:
    explicit Transaction(const ProjectStore& store) : store_(store) {}
    void put(std::string_view name, std::string content);
    void commit();

   private:
    const ProjectStore& store_;
    std::map<std::string, std::string> staged_;
  };

 private:
  std::filesystem::path root_;
};

std::string join_lines(const std::vector<std::string>& lines);

}  // namespace cetk::app
