#include "service.hpp"

#include <sstream>

#include "cetk/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cetk::app {

using ojson = nlohmann::ordered_json;

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  ojson o;
  o["error"] = error_code_name(code);
  o["message"] = message;
  send_json(res, http_status(code), o.dump());
}

std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    throw Error(ErrorCode::SchemaError, std::string("query parameter ") + name + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(n);
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, e.code(), e.detail());
  } catch (const std::exception& e) {
    ojson o;
    o["error"] = "Internal";
    o["message"] = e.what();
    send_json(res, 500, o.dump());
  }
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownItem:
    case ErrorCode::UnknownCluster:
    case ErrorCode::MissingModel:
      return 404;
    case ErrorCode::AlreadyResolved:
    case ErrorCode::QueueNotEmpty:
    case ErrorCode::StoreLocked:
      return 409;
    case ErrorCode::SchemaError:
    case ErrorCode::ParseError:
    case ErrorCode::OutOfBounds:
    case ErrorCode::OverlappingSpans:
    case ErrorCode::UnknownLabel:
      return 400;
    case ErrorCode::InsufficientData:
    case ErrorCode::EmptyClass:
      return 422;
    default:
      return 500;
  }
}

Service::Service(const GlobalOptions& global, const ServiceOptions& options)
    : global_(global),
      options_(options),
      store_(global.store),
      lock_(store_.root()),
      table_(std::make_shared<const EmbeddingTable>(resolve_embeddings(global, store_))),
      server_(std::make_unique<httplib::Server>()) {
  const std::uint64_t seed = resolve_seed(global_, store_);
  TrainConfig cfg;
  cfg.seed = seed;
  if (options_.epochs) cfg.epochs = *options_.epochs;
  // The library default also sets SO_REUSEPORT, which would let a second
  // server share the port silently instead of failing with PortInUse.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  controller_ = std::make_unique<AlController>(store_, table_, seed, cfg);
  // A fresh store gets its initialization event on disk right away.
  controller_->commit();
  publish();

  if (auto text = store_.read(files::kClusters)) {
    std::istringstream in(*text);
    auto clusters = std::make_shared<ClusterSet>(read_clusters(in, *table_));
    std::istringstream rin(store_.read(files::kRecords).value_or(""));
    graph_ = std::make_shared<CauseEffectGraph>(build_graph(read_records(rin), *clusters));
    clusters_ = std::move(clusters);
  }
  install_routes();
}

Service::~Service() { stop(); }

std::shared_ptr<const AlState> Service::snapshot() const {
  std::lock_guard<std::mutex> g(snapshot_mutex_);
  return snapshot_;
}

void Service::publish() {
  auto s = std::make_shared<const AlState>(controller_->state());
  std::lock_guard<std::mutex> g(snapshot_mutex_);
  snapshot_ = std::move(s);
}

void Service::bind() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::PortInUse,
                "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

void Service::install_routes() {
  auto& s = *server_;

  s.Get("/api/queue", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto st = snapshot();
      const std::size_t limit = size_param(req, "limit", st->pending_queue.size());
      ojson items = ojson::array();
      for (std::size_t i = 0; i < std::min(limit, st->pending_queue.size()); ++i) {
        items.push_back(ojson::parse(annotation_item_json(st->pending_queue[i])));
      }
      ojson o;
      o["round"] = st->round;
      o["pending"] = st->pending_queue.size();
      o["items"] = std::move(items);
      send_json(res, 200, o.dump());
    });
  });

  s.Post("/api/annotations", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto [id, resolution] = parse_resolution_request(req.body);
      std::lock_guard<std::mutex> g(write_mutex_);
      try {
        controller_->resolve(id, std::move(resolution));
        controller_->commit();
      } catch (...) {
        controller_->reload();
        throw;
      }
      publish();
      ojson o;
      o["sentence_id"] = id;
      o["status"] = "resolved";
      o["pending"] = controller_->state().pending_count();
      send_json(res, 200, o.dump());
    });
  });

  s.Post("/api/rounds", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      std::lock_guard<std::mutex> g(write_mutex_);
      std::string summary;
      try {
        summary = controller_->advance(options_.sample);
        controller_->commit();
      } catch (...) {
        controller_->reload();
        throw;
      }
      publish();
      send_json(res, 200, summary);
    });
  });

  s.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const auto st = snapshot();
      ojson rows = ojson::array();
      for (const auto& r : st->history) rows.push_back(ojson::parse(history_row_json(r)));
      ojson o;
      o["round"] = st->round;
      o["history"] = std::move(rows);
      send_json(res, 200, o.dump());
    });
  });

  s.Get("/api/clusters", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!clusters_) throw Error(ErrorCode::MissingModel, "no clusters in the store");
      const std::size_t limit = size_param(req, "limit", clusters_->size());
      ojson rows = ojson::array();
      for (const auto& r : cluster_report(*clusters_, limit)) {
        ojson o;
        o["id"] = r.id;
        o["parent"] = r.parent;
        o["label"] = r.label;
        o["count"] = r.count;
        rows.push_back(std::move(o));
      }
      send_json(res, 200, rows.dump());
    });
  });

  s.Get("/api/network", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!graph_) throw Error(ErrorCode::MissingModel, "no graph in the store");
      const std::size_t min_edge = size_param(req, "min_edge", kDefaultMinEdge);
      send_json(res, 200, graph_to_json(filter_graph(*graph_, min_edge)));
    });
  });

  s.Get("/api/network/effects", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!graph_) throw Error(ErrorCode::MissingModel, "no graph in the store");
      if (!req.has_param("cluster")) throw Error(ErrorCode::SchemaError, "cluster parameter required");
      const std::size_t min_edge = size_param(req, "min_edge", 1);
      const std::size_t limit = size_param(req, "limit", 10);
      const auto graph = filter_graph(*graph_, min_edge);
      const std::string label = req.get_param_value("cluster");
      // A cluster dropped by the edge filter still exists; it just has no
      // effects at this threshold.
      if (!graph.node_by_label(label) && graph_->node_by_label(label)) {
        send_json(res, 200, "[]");
        return;
      }
      ojson rows = ojson::array();
      for (const auto& r : effects_of(graph, label, limit)) {
        ojson o;
        o["id"] = r.id;
        o["label"] = r.label;
        o["count"] = r.count;
        rows.push_back(std::move(o));
      }
      send_json(res, 200, rows.dump());
    });
  });
}

}  // namespace cetk::app
