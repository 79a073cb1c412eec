#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppft/error.hpp"
#include "ppft/noise.hpp"
#include "ppft/pooling.hpp"
#include "ppft/vocab.hpp"
#include "ppft/wire.hpp"

namespace ppft {

// Transport: length-prefixed frames over TCP, one 6-byte acknowledgment per
// frame ({status u8, error code u8, payload digest u32le}). The server log
// is JSONL of ServerRecord, a type with numeric fields only -- there is no
// slot a prompt string could occupy.

inline constexpr std::uint32_t kMaxFrameBytes = 64u * 1024 * 1024;

struct ServerRecord {
  std::int64_t ts_ms = 0;
  std::uint16_t version = 0;
  std::uint8_t mechanism = 0;
  std::uint16_t k = 0;
  std::uint32_t d_e = 0;
  std::uint32_t m = 0;
  double epsilon = 0.0;
  std::uint64_t seed_echo = 0;
  std::uint32_t payload_digest = 0;
  std::uint32_t frame_bytes = 0;
  std::uint8_t status = 0;  // ErrorCode numeric value; 0 = accepted
};

inline nlohmann::json to_json(const ServerRecord& rec) {
  return nlohmann::json{{"ts_ms", rec.ts_ms},
                        {"version", rec.version},
                        {"mechanism", rec.mechanism},
                        {"k", rec.k},
                        {"d_e", rec.d_e},
                        {"m", rec.m},
                        {"epsilon", rec.epsilon},
                        {"seed_echo", rec.seed_echo},
                        {"payload_digest", rec.payload_digest},
                        {"frame_bytes", rec.frame_bytes},
                        {"status", rec.status}};
}

struct ParsedEndpoint {
  std::string host;
  std::uint16_t port = 0;
};

inline ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon + 1 == endpoint.size()) {
    raise(ErrorCode::ParseError, "endpoint must be host:port, got '" + endpoint + "'");
  }
  ParsedEndpoint out;
  out.host = endpoint.substr(0, colon);
  const long port = std::strtol(endpoint.c_str() + colon + 1, nullptr, 10);
  if (port < 0 || port > 65535) raise(ErrorCode::ParseError, "port out of range in '" + endpoint + "'");
  out.port = static_cast<std::uint16_t>(port);
  return out;
}

namespace net_detail {

inline bool read_all(int fd, std::uint8_t* buf, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t r = ::recv(fd, buf + got, len - got, 0);
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

inline bool write_all(int fd, const std::uint8_t* buf, std::size_t len) {
  std::size_t sent = 0;
  while (sent < len) {
    const ssize_t w = ::send(fd, buf + sent, len - sent, MSG_NOSIGNAL);
    if (w <= 0) return false;
    sent += static_cast<std::size_t>(w);
  }
  return true;
}

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct Ack {
  std::uint8_t status = 0;
  std::uint8_t code = 0;
  std::uint32_t digest = 0;
};

inline std::array<std::uint8_t, 6> pack_ack(const Ack& ack) {
  return {ack.status,
          ack.code,
          static_cast<std::uint8_t>(ack.digest),
          static_cast<std::uint8_t>(ack.digest >> 8),
          static_cast<std::uint8_t>(ack.digest >> 16),
          static_cast<std::uint8_t>(ack.digest >> 24)};
}

inline Ack unpack_ack(const std::array<std::uint8_t, 6>& raw) {
  Ack ack;
  ack.status = raw[0];
  ack.code = raw[1];
  ack.digest = static_cast<std::uint32_t>(raw[2]) | (static_cast<std::uint32_t>(raw[3]) << 8) |
               (static_cast<std::uint32_t>(raw[4]) << 16) |
               (static_cast<std::uint32_t>(raw[5]) << 24);
  return ack;
}

}  // namespace net_detail

// Concurrent frame receiver. Per-connection frames are processed in order;
// log appends are serialized behind one mutex; a malformed frame gets an
// error acknowledgment and leaves the connection usable for the next frame.
class FrameServer {
 public:
  FrameServer(const std::string& bind_addr, const std::string& log_path)
      : bind_(parse_endpoint(bind_addr)), log_path_(log_path) {}

  ~FrameServer() { stop(); }

  void start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) raise(ErrorCode::ConnectionFailed, "socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(bind_.port);
    if (bind_.host.empty() || bind_.host == "0.0.0.0") {
      addr.sin_addr.s_addr = INADDR_ANY;
    } else if (::inet_pton(AF_INET, bind_.host.c_str(), &addr.sin_addr) != 1) {
      raise(ErrorCode::ParseError, "bind host must be an IPv4 address, got '" + bind_.host + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      raise(ErrorCode::ConnectionFailed, "bind(" + bind_.host + ":" + std::to_string(bind_.port) +
                                             ") failed: " + std::strerror(errno));
    }
    if (::listen(listen_fd_, 64) != 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      raise(ErrorCode::ConnectionFailed, "listen() failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    log_.open(log_path_, std::ios::app);  // appends across restarts, never truncates
    if (!log_) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      raise(ErrorCode::ParseError, "cannot open log file " + log_path_);
    }

    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    if (listen_fd_ >= 0) {
      ::shutdown(listen_fd_, SHUT_RDWR);
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    {
      // wake workers blocked in recv so their joins cannot hang
      std::lock_guard<std::mutex> lock(workers_mutex_);
      for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    std::vector<std::thread> workers;
    {
      std::lock_guard<std::mutex> lock(workers_mutex_);
      workers.swap(workers_);
    }
    for (auto& t : workers) {
      if (t.joinable()) t.join();
    }
    if (log_.is_open()) log_.close();
  }

  std::uint16_t port() const { return port_; }
  std::uint64_t frames_accepted() const { return frames_accepted_; }
  std::uint64_t frames_rejected() const { return frames_rejected_; }

 private:
  void accept_loop() {
    while (running_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (!running_) break;
        continue;
      }
      std::lock_guard<std::mutex> lock(workers_mutex_);
      conn_fds_.push_back(fd);
      workers_.emplace_back([this, fd] {
        serve_connection(fd);
        {
          std::lock_guard<std::mutex> inner(workers_mutex_);
          std::erase(conn_fds_, fd);
        }
        ::close(fd);  // closed only after deregistering: fd numbers get reused
      });
    }
  }

  void serve_connection(int fd) {
    std::vector<std::uint8_t> buf;
    while (running_) {
      std::uint8_t len_raw[4];
      if (!net_detail::read_all(fd, len_raw, 4)) break;  // clean close or broken peer
      const std::uint32_t frame_len = static_cast<std::uint32_t>(len_raw[0]) |
                                      (static_cast<std::uint32_t>(len_raw[1]) << 8) |
                                      (static_cast<std::uint32_t>(len_raw[2]) << 16) |
                                      (static_cast<std::uint32_t>(len_raw[3]) << 24);
      if (frame_len < kWireHeaderBytes + 4 || frame_len > kMaxFrameBytes) {
        // framing is no longer trustworthy; reply and drop the connection
        reply(fd, {1, static_cast<std::uint8_t>(ErrorCode::LengthMismatch), 0});
        log_record(make_error_record(ErrorCode::LengthMismatch, frame_len));
        break;
      }
      buf.resize(frame_len);
      if (!net_detail::read_all(fd, buf.data(), frame_len)) break;

      ServerRecord rec;
      rec.ts_ms = net_detail::now_ms();
      rec.frame_bytes = frame_len;
      net_detail::Ack ack;
      try {
        const WireFrame frame = decode_frame(buf);
        rec.version = frame.version;
        rec.mechanism = frame.mechanism_code;
        rec.k = frame.k;
        rec.d_e = frame.d_e;
        rec.m = frame.m;
        rec.epsilon = frame.epsilon;
        rec.seed_echo = frame.seed_echo;
        rec.payload_digest = payload_digest(frame);
        rec.status = 0;
        ack = {0, 0, rec.payload_digest};
        ++frames_accepted_;
      } catch (const Error& e) {
        rec.status = static_cast<std::uint8_t>(e.code());
        ack = {1, rec.status, 0};
        ++frames_rejected_;
      }
      log_record(rec);
      if (!reply(fd, ack)) break;
    }
  }

  ServerRecord make_error_record(ErrorCode code, std::uint32_t frame_bytes) {
    ServerRecord rec;
    rec.ts_ms = net_detail::now_ms();
    rec.frame_bytes = frame_bytes;
    rec.status = static_cast<std::uint8_t>(code);
    return rec;
  }

  bool reply(int fd, const net_detail::Ack& ack) {
    const auto raw = net_detail::pack_ack(ack);
    return net_detail::write_all(fd, raw.data(), raw.size());
  }

  void log_record(const ServerRecord& rec) {
    std::lock_guard<std::mutex> lock(log_mutex_);
    log_ << to_json(rec).dump() << "\n";
    log_.flush();
  }

  ParsedEndpoint bind_;
  std::string log_path_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> conn_fds_;
  std::mutex log_mutex_;
  std::ofstream log_;
  std::atomic<std::uint64_t> frames_accepted_{0};
  std::atomic<std::uint64_t> frames_rejected_{0};
};

struct SendOptions {
  int max_retries = 3;  // connection attempts beyond the first
};

struct Receipt {
  std::uint32_t client_digest = 0;
  std::uint32_t server_digest = 0;
  bool acknowledged = false;
  std::uint8_t server_code = 0;
  bool unprotected = false;  // mechanism None: nothing hides the embedding geometry
  int retries_used = 0;
  std::size_t frame_bytes = 0;
};

namespace net_detail {

inline int connect_once(const ParsedEndpoint& ep) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return -1;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host.empty() ? "127.0.0.1" : ep.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    hostent* he = ::gethostbyname(host.c_str());
    if (he == nullptr || he->h_addrtype != AF_INET) {
      ::close(fd);
      return -1;
    }
    std::memcpy(&addr.sin_addr, he->h_addr_list[0], sizeof(addr.sin_addr));
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

}  // namespace net_detail

// Ship pre-encoded frame bytes and wait for the acknowledgment.
inline Receipt send_frame_bytes(const std::vector<std::uint8_t>& frame_bytes,
                                const std::string& endpoint, const SendOptions& opts = {}) {
  const ParsedEndpoint ep = parse_endpoint(endpoint);
  int fd = -1;
  int attempts = 0;
  for (; attempts <= opts.max_retries; ++attempts) {
    fd = net_detail::connect_once(ep);
    if (fd >= 0) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20 * (attempts + 1)));
  }
  if (fd < 0) {
    raise(ErrorCode::ConnectionFailed,
          "send: cannot reach " + endpoint + " after " + std::to_string(attempts) + " attempts");
  }

  std::uint8_t len_raw[4];
  const std::uint32_t len = static_cast<std::uint32_t>(frame_bytes.size());
  for (int i = 0; i < 4; ++i) len_raw[i] = static_cast<std::uint8_t>(len >> (8 * i));

  Receipt receipt;
  receipt.retries_used = attempts;
  receipt.frame_bytes = frame_bytes.size();
  bool ok = net_detail::write_all(fd, len_raw, 4) &&
            net_detail::write_all(fd, frame_bytes.data(), frame_bytes.size());
  std::array<std::uint8_t, 6> ack_raw{};
  ok = ok && net_detail::read_all(fd, ack_raw.data(), ack_raw.size());
  ::close(fd);
  if (!ok) raise(ErrorCode::ConnectionFailed, "send: connection dropped mid-frame");

  const net_detail::Ack ack = net_detail::unpack_ack(ack_raw);
  receipt.server_digest = ack.digest;
  receipt.server_code = ack.code;
  receipt.acknowledged = ack.status == 0;
  return receipt;
}

// Encode the full client pipeline for `token_ids`: embed -> k-pool (unit
// clipped) -> obfuscate -> frame bytes. Exposed separately so tests can
// inspect exactly what would cross the boundary.
inline std::vector<std::uint8_t> build_frame_bytes(std::span<const int> token_ids,
                                                   const TokenVocab& vocab,
                                                   const PoolConfig& pool_cfg,
                                                   const NoiseConfig& noise_cfg) {
  const Matrix h = embed(vocab, token_ids);
  const PooledEmbeddings u = k_pool(h, pool_cfg);
  const ObfuscatedEmbeddings obf = obfuscate(u, noise_cfg);
  return encode_frame(frame_from(obf));
}

inline Receipt client_send(std::span<const int> token_ids, const TokenVocab& vocab,
                           const PoolConfig& pool_cfg, const NoiseConfig& noise_cfg,
                           const std::string& endpoint, const SendOptions& opts = {}) {
  const auto bytes = build_frame_bytes(token_ids, vocab, pool_cfg, noise_cfg);
  const WireFrame frame = decode_frame(bytes);  // client-side sanity before transmit
  Receipt receipt = send_frame_bytes(bytes, endpoint, opts);
  receipt.client_digest = payload_digest(frame);
  receipt.unprotected = noise_cfg.mechanism == Mechanism::None;
  receipt.acknowledged = receipt.acknowledged && receipt.server_digest == receipt.client_digest;
  return receipt;
}

}  // namespace ppft
