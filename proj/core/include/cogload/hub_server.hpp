#pragma once

#include "cogload/stream_hub.hpp"

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace cogload::hub {

namespace net {
class Socket;
}

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  HubConfig hub;
  bool exit_after_session = false;
};

/// TCP front end for StreamHub: one connection per producer, each opened with
/// a hello line. Ratings and errors go back on the event connection.
class HubServer {
public:
  HubServer(ServerConfig config, std::optional<model::ModelBundle> model,
            StreamHub::FeatureSink on_features = {}, StreamHub::ResponseSink on_response = {});
  ~HubServer();
  HubServer(const HubServer&) = delete;
  HubServer& operator=(const HubServer&) = delete;

  /// Bound port; valid right after construction.
  std::uint16_t port() const { return port_; }
  /// Accept loop. Returns after stop(), or after session_end when configured.
  void run();
  void stop();

  StreamHub& hub() { return *hub_; }
  std::uint64_t rejected_lines() const { return rejected_.load(); }

private:
  struct Connection;
  void serve(Connection& conn);
  void respond(const Response& r);

  ServerConfig config_;
  std::unique_ptr<net::Socket> listener_;
  std::uint16_t port_ = 0;
  StreamHub::ResponseSink on_response_;
  std::unique_ptr<StreamHub> hub_;

  std::mutex connections_mutex_;
  std::list<std::unique_ptr<Connection>> connections_;
  std::mutex event_mutex_;
  Connection* event_connection_ = nullptr;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> rejected_{0};
};

}  // namespace cogload::hub
