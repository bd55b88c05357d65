#pragma once

#include "pslam/wire.hpp"

#include <memory>
#include <string>

namespace pslam {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Blocking TCP byte stream. read_some returns 0 once the peer closes.
class TcpStream final : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream() override;

  std::size_t read_some(std::uint8_t* buf, std::size_t len) override;
  void write_all(const std::uint8_t* buf, std::size_t len) override;
  void shutdown_write();
  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  /// Binds and listens on the given port; port 0 picks a free one.
  explicit TcpListener(std::uint16_t port, const std::string& host = "0.0.0.0");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks for the next connection; returns nullptr once closed.
  std::unique_ptr<TcpStream> accept();
  /// Unblocks any pending accept.
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<TcpStream> tcp_connect(const std::string& host,
                                       std::uint16_t port);

}  // namespace pslam
