#include "cogload/hub_server.hpp"

#include "cogload/error.hpp"

#include "net.hpp"

namespace cogload::hub {

struct HubServer::Connection {
  net::Socket socket;
  std::thread thread;
  std::mutex write_mutex;
};

HubServer::HubServer(ServerConfig config, std::optional<model::ModelBundle> model, StreamHub::FeatureSink on_features,
                     StreamHub::ResponseSink on_response)
    : config_(std::move(config)),
      listener_(std::make_unique<net::Socket>(net::listen_tcp(config_.host, config_.port))),
      port_(net::local_port(*listener_)),
      on_response_(std::move(on_response)) {
  hub_ = std::make_unique<StreamHub>(
      config_.hub, std::move(model), [this](const Response& r) { respond(r); }, std::move(on_features));
}

HubServer::~HubServer() {
  stop();
  hub_.reset();
  std::lock_guard lock(connections_mutex_);
  for (auto& c : connections_) {
    if (c->thread.joinable()) {
      c->thread.join();
    }
  }
}

void HubServer::respond(const Response& r) {
  if (on_response_) {
    on_response_(r);
  }
  const std::string line = std::visit([](const auto& m) { return encode(m); }, r) + "\n";
  std::lock_guard lock(event_mutex_);
  if (event_connection_ != nullptr) {
    std::lock_guard write(event_connection_->write_mutex);
    net::send_all(event_connection_->socket, line);
  }
}

void HubServer::serve(Connection& conn) {
  net::LineReader reader(conn.socket);
  std::optional<StreamId> stream;
  auto reply = [&](const std::string& line) {
    std::lock_guard write(conn.write_mutex);
    net::send_all(conn.socket, line + "\n");
  };
  while (auto line = reader.next()) {
    if (line->empty()) {
      continue;
    }
    try {
      if (!stream) {
        const InboundLine in = parse_line(*line);
        const auto* hello = std::get_if<Hello>(&in);
        if (hello == nullptr) {
          throw Error(ErrorCode::SchemaViolation, "stream-hub: connection must start with a hello");
        }
        stream = hello->stream;
        if (*stream == StreamId::Event) {
          std::lock_guard lock(event_mutex_);
          event_connection_ = &conn;
        }
        continue;
      }
      const StreamMessage msg = parse_message(*line);
      if (msg.stream != *stream) {
        throw Error(ErrorCode::SchemaViolation, "stream-hub: message for '" + std::string(to_string(msg.stream)) +
                                                    "' on the '" + std::string(to_string(*stream)) + "' connection");
      }
      hub_->ingest(msg);
    } catch (const Error& e) {
      ++rejected_;
      reply(encode(ErrorMessage{-1, std::string(to_string(e.code())), e.what()}));
      if (!stream) {
        break;  // no valid hello, drop the connection
      }
    }
  }
  std::lock_guard lock(event_mutex_);
  if (event_connection_ == &conn) {
    event_connection_ = nullptr;
  }
}

void HubServer::run() {
  while (!stop_) {
    if (config_.exit_after_session && hub_->session_finished()) {
      break;
    }
    net::Socket s = net::accept_with_timeout(*listener_, 50);
    if (!s.valid()) {
      continue;
    }
    net::set_nodelay(s);
    auto conn = std::make_unique<Connection>();
    conn->socket = std::move(s);
    Connection& ref = *conn;
    std::lock_guard lock(connections_mutex_);
    connections_.push_back(std::move(conn));
    ref.thread = std::thread([this, &ref] { serve(ref); });
  }
  stop();
}

void HubServer::stop() {
  stop_ = true;
  std::lock_guard lock(connections_mutex_);
  for (auto& c : connections_) {
    c->socket.shutdown_both();
  }
}

}  // namespace cogload::hub
