#include "store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk::app {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string Manifest::to_json() const {
  ojson o;
  o["schema_version"] = 1;
  o["seed"] = seed;
  o["embeddings"] = embeddings;
  if (similarity_threshold) o["similarity_threshold"] = *similarity_threshold;
  if (min_count) o["min_count"] = *min_count;
  return o.dump(2) + "\n";
}

Manifest Manifest::from_json(std::string_view text) {
  try {
    const auto o = ojson::parse(text);
    if (o.value("schema_version", 0) != 1) {
      throw Error(ErrorCode::SchemaError, "unsupported manifest schema_version");
    }
    Manifest m;
    m.seed = o.value("seed", std::uint64_t{42});
    m.embeddings = o.value("embeddings", std::string{});
    if (o.contains("similarity_threshold")) m.similarity_threshold = o["similarity_threshold"].get<double>();
    if (o.contains("min_count")) m.min_count = o["min_count"].get<std::size_t>();
    return m;
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("manifest: ") + e.what());
  }
}

StoreLock::StoreLock(const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  const fs::path lock = root / files::kLock;
  fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open " + lock.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    if (err == EWOULDBLOCK) {
      throw Error(ErrorCode::StoreLocked, "another writer holds " + lock.string());
    }
    throw Error(ErrorCode::IoError, std::string("flock: ") + std::strerror(err));
  }
}

StoreLock::~StoreLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

ProjectStore::ProjectStore(fs::path root) : root_(std::move(root)) {}

fs::path ProjectStore::path_of(std::string_view name) const { return root_ / fs::path(name); }

bool ProjectStore::exists(std::string_view name) const { return fs::exists(path_of(name)); }

std::optional<std::string> ProjectStore::read(std::string_view name) const {
  std::ifstream in(path_of(name), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> ProjectStore::read_lines(std::string_view name) const {
  std::vector<std::string> out;
  const auto text = read(name);
  if (!text) return out;
  std::istringstream in(*text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  }
  return out;
}

Manifest ProjectStore::manifest() const {
  const auto text = read(files::kManifest);
  return text ? Manifest::from_json(*text) : Manifest{};
}

void ProjectStore::Transaction::put(std::string_view name, std::string content) {
  staged_[std::string(name)] = std::move(content);
}

void ProjectStore::Transaction::commit() {
  // Write every temp file first; only rename once all of them are on disk.
  std::vector<std::pair<fs::path, fs::path>> renames;
  try {
    for (const auto& [name, content] : staged_) {
      const fs::path target = store_.path_of(name);
      fs::create_directories(target.parent_path());
      fs::path tmp = target;
      tmp += ".tmp";
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
      renames.emplace_back(tmp, target);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& [tmp, target] : renames) fs::remove(tmp, ec);
    throw;
  }
  for (const auto& [tmp, target] : renames) fs::rename(tmp, target);
  staged_.clear();
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace cetk::app
