#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tactile_eit/experiment.hpp"
#include "tactile_eit/hmi.hpp"

namespace tactile_eit {

// One touchpad session. Each accepted message advances exactly one frame:
//   {"type": "touch_down" | "touch_move", "x": mm, "y": mm, "radius"?: mm}
//   {"type": "touch_up"} and {"type": "tick"}
// and is answered with
//   {"type": "frame", "frame", "grid", "active", "centroid", "intensity",
//    "event"?, "action"?, "amplitude"?}
// Anything else gets {"type": "error", "message"} and leaves the session
// state untouched.
class TouchSession {
 public:
  TouchSession(const ReconstructionPipeline& pipeline, const HmiSettings& settings,
               std::uint64_t noise_seed, std::ostream* log = nullptr);

  std::string handle(std::string_view message);
  std::size_t frames() const { return frame_; }

 private:
  std::string step();

  const ReconstructionPipeline& pipeline_;
  HmiSettings settings_;
  std::uint64_t noise_seed_;
  std::ostream* log_;
  HmiSession hmi_;
  std::optional<TouchSpec> touch_;
  std::size_t frame_ = 0;
};

std::string error_reply(std::string_view message);

// Newline-delimited JSON over TCP, or WebSocket text frames when the
// connection opens with an HTTP upgrade request. One thread per connection;
// messages within a connection are handled in arrival order.
class SessionServer {
 public:
  struct Options {
    std::string bind_address = "127.0.0.1";
    std::uint16_t port = 8765;  // 0 picks a free port
    // When set, every session writes session_<n>.jsonl here.
    std::optional<std::filesystem::path> log_dir;
  };

  SessionServer(const ReconstructionPipeline& pipeline, HmiSettings settings,
                std::uint64_t noise_seed, Options options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  std::uint16_t port() const { return port_; }
  // Blocks until stop() is called.
  void serve();
  void stop();

 private:
  void handle_connection(int fd, std::size_t session_id);

  const ReconstructionPipeline& pipeline_;
  HmiSettings settings_;
  std::uint64_t noise_seed_;
  Options options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::vector<int> client_fds_;
  std::vector<std::thread> workers_;
};

// WebSocket handshake accept value for a Sec-WebSocket-Key.
std::string websocket_accept_key(std::string_view client_key);

}  // namespace tactile_eit
