#pragma once

// Socket front end for the teleop runtime. One TCP port speaks either
// newline-delimited JSON or WebSocket text frames (picked from the first
// request line). The first client to connect pilots; later ones observe.

#include "screwsnake/teleop.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace screwsnake {

/// Sec-WebSocket-Accept value for a handshake key.
std::string websocket_accept_key(const std::string& client_key);

/// Encodes one unmasked server-to-client WebSocket text frame.
std::string websocket_text_frame(const std::string& payload);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8765;             // 0 picks a free port
  bool realtime = true;        // pace ticks to the wall clock
  double max_duration_s = 0.0; // virtual seconds; 0 runs until stop()
};

class TeleopServer {
 public:
  TeleopServer(RuntimeConfig config, ServerOptions options);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts serving; returns the bound port.
  int start();
  void stop();
  /// Blocks until the run ends (max_duration reached or stop()).
  void wait();
  bool running() const { return running_; }

 private:
  struct Client;

  void accept_loop();
  void sim_loop();
  void serve_client(std::shared_ptr<Client> client);
  void handle_text(const std::shared_ptr<Client>& client, const std::string& text);
  void broadcast(const std::string& text);

  TeleopRuntime runtime_;
  std::mutex runtime_mutex_;
  ServerOptions options_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::atomic<int> next_id_{1};
  std::thread accept_thread_;
  std::thread sim_thread_;
  std::mutex clients_mutex_;
  std::map<int, std::shared_ptr<Client>> clients_;
  std::vector<std::thread> client_threads_;
};

}  // namespace screwsnake
