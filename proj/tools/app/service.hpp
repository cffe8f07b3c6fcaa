#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "cetk/error.hpp"
#include "commands.hpp"

namespace httplib {
class Server;
}

namespace cetk::app {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  std::size_t sample = kDefaultRoundSample;
  std::optional<std::size_t> epochs;
};

/// JSON HTTP front end over a project store. Holds the store's writer lock
/// for its whole lifetime; mutations are serialized on one mutex while reads
/// work on immutable snapshots.
class Service {
 public:
  /// Throws StoreLocked when another writer is active.
  Service(const GlobalOptions& global, const ServiceOptions& options);
  ~Service();

  /// Binds the listening socket. Throws PortInUse.
  void bind();
  int port() const noexcept { return port_; }
  /// Blocks until stop() is called.
  void listen();
  void stop();

 private:
  void install_routes();
  std::shared_ptr<const AlState> snapshot() const;
  void publish();

  GlobalOptions global_;
  ServiceOptions options_;
  ProjectStore store_;
  StoreLock lock_;
  std::shared_ptr<const EmbeddingTable> table_;
  std::unique_ptr<AlController> controller_;
  std::mutex write_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const AlState> snapshot_;
  std::shared_ptr<const ClusterSet> clusters_;
  std::shared_ptr<const CauseEffectGraph> graph_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

/// HTTP status for a toolkit error.
int http_status(ErrorCode code);

}  // namespace cetk::app
