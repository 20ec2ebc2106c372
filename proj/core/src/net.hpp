#pragma once

// Thin POSIX socket helpers shared by the hub server and the replay client.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cogload::hub::net {

class Socket {
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  /// Unblocks a reader in another thread without closing the descriptor.
  void shutdown_both();
  void shutdown_write();

private:
  int fd_ = -1;
};

/// Listening socket on host:port (port 0 picks a free port).
Socket listen_tcp(const std::string& host, std::uint16_t port);
std::uint16_t local_port(const Socket& s);
/// Waits up to timeout_ms for a connection; empty socket on timeout.
Socket accept_with_timeout(const Socket& listener, int timeout_ms);
/// Retries until the deadline so a server that is still starting is reached.
Socket connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms);
void set_nodelay(const Socket& s);

/// Writes the whole buffer; false once the peer is gone.
bool send_all(const Socket& s, std::string_view data);

/// Buffered newline splitter over a blocking socket.
class LineReader {
public:
  explicit LineReader(const Socket& s) : socket_(s) {}
  /// Next line without the terminator, or nullopt on EOF/error. A trailing
  /// fragment without newline is returned as a final line.
  std::optional<std::string> next();

private:
  const Socket& socket_;
  std::string buffer_;
  std::size_t start_ = 0;
  bool eof_ = false;
};

}  // namespace cogload::hub::net
