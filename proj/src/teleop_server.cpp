#include "screwsnake/teleop_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>

namespace screwsnake {

struct TeleopServer::Client {
  int id = 0;
  int fd = -1;
  bool websocket = false;
  std::mutex send_mutex;
  std::atomic<bool> open{true};
  std::atomic<bool> ready{false};  // policy sent; eligible for broadcasts

  void send_text(const std::string& text) {
    const std::string wire = websocket ? websocket_text_frame(text) : text + "\n";
    std::lock_guard lock(send_mutex);
    if (!open) return;
    std::size_t sent = 0;
    while (sent < wire.size()) {
      const ssize_t k = ::send(fd, wire.data() + sent, wire.size() - sent, MSG_NOSIGNAL);
      if (k <= 0) {
        open = false;
        return;
      }
      sent += static_cast<std::size_t>(k);
    }
  }
};

std::string websocket_accept_key(const std::string& client_key) {
  const std::string input = client_key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha1(), nullptr);
  unsigned char out[64];
  const int n = EVP_EncodeBlock(out, digest, static_cast<int>(len));
  return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(n));
}

std::string websocket_text_frame(const std::string& payload) {
  std::string f;
  f.push_back(static_cast<char>(0x81));
  const std::size_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(n));
  } else if (n < 65536) {
    f.push_back(126);
    f.push_back(static_cast<char>((n >> 8) & 0xFF));
    f.push_back(static_cast<char>(n & 0xFF));
  } else {
    f.push_back(127);
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xFF));
  }
  return f + payload;
}

namespace {

bool read_exact(int fd, std::string& buffer, std::size_t n) {
  char chunk[4096];
  while (buffer.size() < n) {
    const ssize_t k = ::recv(fd, chunk, sizeof chunk, 0);
    if (k <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(k));
  }
  return true;
}

std::string header_value(const std::string& request, const std::string& name) {
  std::string lower = request;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto pos = lower.find("\r\n" + key + ":");
  if (pos == std::string::npos) return {};
  const auto start = pos + key.size() + 3;
  const auto end = request.find("\r\n", start);
  std::string v = request.substr(start, end - start);
  v.erase(0, v.find_first_not_of(" \t"));
  v.erase(v.find_last_not_of(" \t") + 1);
  return v;
}

}  // namespace

TeleopServer::TeleopServer(RuntimeConfig config, ServerOptions options)
    : runtime_(std::move(config)), options_(std::move(options)) {}

TeleopServer::~TeleopServer() {
  stop();
  wait();
}

int TeleopServer::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error("cannot create socket");
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1)
    throw InvalidInput("bad listen address " + options_.host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw Error("cannot bind " + options_.host + ":" + std::to_string(options_.port) + ": " + std::strerror(errno));
  if (::listen(listen_fd_, 8) != 0) throw Error("cannot listen on socket");
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  sim_thread_ = std::thread([this] { sim_loop(); });
  return ntohs(addr.sin_port);
}

void TeleopServer::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::lock_guard lock(clients_mutex_);
  for (auto& [id, c] : clients_) {
    c->open = false;
    ::shutdown(c->fd, SHUT_RDWR);
  }
}

void TeleopServer::wait() {
  if (sim_thread_.joinable()) sim_thread_.join();
  stop();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(clients_mutex_);
    threads.swap(client_threads_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
}

void TeleopServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    auto client = std::make_shared<Client>();
    client->id = next_id_++;
    client->fd = fd;
    std::lock_guard lock(clients_mutex_);
    clients_[client->id] = client;
    client_threads_.emplace_back([this, client] { serve_client(client); });
  }
}

void TeleopServer::sim_loop() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration<double, std::milli>(runtime_.period_ms());
  auto next = clock::now();
  while (running_) {
    std::optional<StateUpdate> update;
    double now = 0.0;
    {
      std::lock_guard lock(runtime_mutex_);
      update = runtime_.tick();
      now = runtime_.now_ms();
    }
    if (update) broadcast(to_json(*update).dump());
    if (options_.max_duration_s > 0 && now >= options_.max_duration_s * 1000.0) break;
    if (options_.realtime) {
      next += std::chrono::duration_cast<clock::duration>(period);
      std::this_thread::sleep_until(next);
    }
  }
  stop();
}

void TeleopServer::broadcast(const std::string& text) {
  std::vector<std::shared_ptr<Client>> targets;
  {
    std::lock_guard lock(clients_mutex_);
    for (auto& [id, c] : clients_) targets.push_back(c);
  }
  for (auto& c : targets)
    if (c->ready) c->send_text(text);
}

void TeleopServer::handle_text(const std::shared_ptr<Client>& client, const std::string& text) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    client->send_text(error_message("parse_error", e.what()).dump());
    return;
  }
  try {
    const TeleopFrame frame = parse_frame(msg);
    SubmitResult r;
    {
      std::lock_guard lock(runtime_mutex_);
      if (!runtime_.pilot()) runtime_.connect(client->id);
      r = runtime_.submit(client->id, frame);
    }
    if (r.status == SubmitStatus::Rejected) client->send_text(error_message(r.code, r.detail).dump());
  } catch (const ProtocolError& e) {
    client->send_text(error_message(e.code(), e.what()).dump());
  }
}

void TeleopServer::serve_client(std::shared_ptr<Client> client) {
  std::string buffer;
  // Silent clients are taken to speak newline-delimited JSON.
  pollfd pfd{client->fd, POLLIN, 0};
  const bool early = ::poll(&pfd, 1, 250) > 0;
  if (early && read_exact(client->fd, buffer, 4) && buffer.rfind("GET ", 0) == 0) {
    while (buffer.find("\r\n\r\n") == std::string::npos)
      if (!read_exact(client->fd, buffer, buffer.size() + 1)) break;
    const auto end = buffer.find("\r\n\r\n");
    const std::string request = end == std::string::npos ? buffer : buffer.substr(0, end);
    const std::string key = header_value(request, "Sec-WebSocket-Key");
    if (key.empty()) {
      const std::string resp = "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
      ::send(client->fd, resp.data(), resp.size(), MSG_NOSIGNAL);
      client->open = false;
    } else {
      const std::string resp =
          "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
          "Sec-WebSocket-Accept: " + websocket_accept_key(key) + "\r\n\r\n";
      ::send(client->fd, resp.data(), resp.size(), MSG_NOSIGNAL);
      client->websocket = true;
      buffer.erase(0, end + 4);
    }
  }

  {
    std::lock_guard lock(runtime_mutex_);
    runtime_.connect(client->id);
  }
  client->send_text(policy_message(runtime_.config().policy, runtime_.config().geom.n_joints(),
                                   runtime_.config().bus.loop_rate, runtime_.state_rate_hz())
                        .dump());
  client->ready = true;

  while (client->open && running_) {
    if (client->websocket) {
      if (!read_exact(client->fd, buffer, 2)) break;
      const auto b0 = static_cast<unsigned char>(buffer[0]);
      const auto b1 = static_cast<unsigned char>(buffer[1]);
      const int opcode = b0 & 0x0F;
      const bool masked = b1 & 0x80;
      std::uint64_t len = b1 & 0x7F;
      std::size_t head = 2;
      if (len == 126) {
        if (!read_exact(client->fd, buffer, 4)) break;
        len = (static_cast<unsigned char>(buffer[2]) << 8) | static_cast<unsigned char>(buffer[3]);
        head = 4;
      } else if (len == 127) {
        if (!read_exact(client->fd, buffer, 10)) break;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<unsigned char>(buffer[2 + i]);
        head = 10;
      }
      if (len > (1u << 20)) break;
      const std::size_t mask_at = head;
      if (masked) head += 4;
      if (!read_exact(client->fd, buffer, head + len)) break;
      std::string payload = buffer.substr(head, len);
      if (masked)
        for (std::size_t i = 0; i < payload.size(); ++i) payload[i] ^= buffer[mask_at + (i % 4)];
      buffer.erase(0, head + len);
      if (opcode == 0x8) break;
      if (opcode == 0x9) {
        std::string pong;
        pong.push_back(static_cast<char>(0x8A));
        pong.push_back(static_cast<char>(payload.size()));
        pong += payload;
        std::lock_guard lock(client->send_mutex);
        ::send(client->fd, pong.data(), pong.size(), MSG_NOSIGNAL);
        continue;
      }
      if (opcode == 0x1) handle_text(client, payload);
    } else {
      const auto nl = buffer.find('\n');
      if (nl == std::string::npos) {
        if (!read_exact(client->fd, buffer, buffer.size() + 1)) break;
        continue;
      }
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) handle_text(client, line);
    }
  }

  client->open = false;
  {
    std::lock_guard lock(runtime_mutex_);
    runtime_.disconnect(client->id);
  }
  {
    std::lock_guard lock(clients_mutex_);
    clients_.erase(client->id);
  }
  std::lock_guard lock(client->send_mutex);
  ::close(client->fd);
}

}  // namespace screwsnake
