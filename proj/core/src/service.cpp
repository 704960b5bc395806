#include "tactile_eit/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "tactile_eit/error.hpp"
#include "tactile_eit/io.hpp"

namespace tactile_eit {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxMessageBytes = 1 << 20;

double round4(double v) { return std::round(v * 1e4) / 1e4; }

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Appends whatever is available to `buf`; false on EOF or error.
bool recv_some(int fd, std::string& buf) {
  char chunk[4096];
  while (true) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buf.append(chunk, static_cast<std::size_t>(n));
    return true;
  }
}

bool recv_exact(int fd, std::string& buf, std::size_t want) {
  while (buf.size() < want) {
    if (!recv_some(fd, buf)) return false;
  }
  return true;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string ws_frame(std::uint8_t opcode, std::string_view payload) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | opcode));
  const std::size_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(n));
  } else if (n <= 0xffff) {
    out.push_back(static_cast<char>(126));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
  } else {
    out.push_back(static_cast<char>(127));
    for (int shift = 56; shift >= 0; shift -= 8) {
      out.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> shift) & 0xff));
    }
  }
  out.append(payload);
  return out;
}

}  // namespace

std::string error_reply(std::string_view message) {
  ojson j;
  j["type"] = "error";
  j["message"] = std::string(message);
  return j.dump();
}

TouchSession::TouchSession(const ReconstructionPipeline& pipeline, const HmiSettings& settings,
                           std::uint64_t noise_seed, std::ostream* log)
    : pipeline_(pipeline),
      settings_(settings),
      noise_seed_(noise_seed),
      log_(log),
      hmi_(settings.actions, settings.debounce_frames) {}

std::string TouchSession::handle(std::string_view message) {
  json msg;
  try {
    msg = json::parse(message);
  } catch (const json::parse_error& e) {
    return error_reply(std::string("malformed JSON: ") + e.what());
  }
  if (!msg.is_object()) return error_reply("message must be a JSON object");
  const auto type_it = msg.find("type");
  if (type_it == msg.end() || !type_it->is_string()) return error_reply("missing \"type\"");
  const std::string type = type_it->get<std::string>();

  if (type == "touch_down" || type == "touch_move") {
    const auto x = msg.find("x");
    const auto y = msg.find("y");
    if (x == msg.end() || y == msg.end() || !x->is_number() || !y->is_number()) {
      return error_reply(type + " needs numeric \"x\" and \"y\"");
    }
    double radius = settings_.default_radius_mm;
    if (const auto r = msg.find("radius"); r != msg.end()) {
      if (!r->is_number() || !(r->get<double>() > 0.0)) {
        return error_reply("\"radius\" must be a positive number");
      }
      radius = r->get<double>();
    }
    const Point2 c{x->get<double>(), y->get<double>()};
    const double side = pipeline_.sim_mesh().side();
    if (!(c.x >= 0.0 && c.x <= side && c.y >= 0.0 && c.y <= side)) {
      return error_reply("touch position outside the sensor");
    }
    touch_ = TouchSpec::disc(c, radius, settings_.touch_level);
  } else if (type == "touch_up") {
    touch_.reset();
  } else if (type != "tick") {
    return error_reply("unknown message type '" + type + "'");
  }

  try {
    return step();
  } catch (const std::exception& e) {
    return error_reply(e.what());
  }
}

std::string TouchSession::step() {
  std::vector<TouchSpec> touches;
  if (touch_) touches.push_back(*touch_);
  const MeasurementFrame dv = pipeline_.delta_frame(touches, noise_seed_ + frame_);
  const ReconstructionImage image = postprocess(pipeline_.reconstruct(dv, 0));
  const TouchState state = classify_frame(image, pipeline_.recon_mesh(),
                                          settings_.activation_threshold, frame_,
                                          settings_.blob_threshold);
  const HmiSession::Output out = hmi_.process(state);

  ojson reply;
  reply["type"] = "frame";
  reply["frame"] = frame_;
  ojson grid = ojson::array();
  for (const auto& row : rasterize(image, pipeline_.recon_mesh(), settings_.raster)) {
    ojson r = ojson::array();
    for (double v : row) r.push_back(round4(v));
    grid.push_back(std::move(r));
  }
  reply["grid"] = std::move(grid);
  reply["active"] = state.active;
  reply["centroid"] =
      state.centroid ? ojson::array({state.centroid->x, state.centroid->y}) : ojson(nullptr);
  reply["intensity"] = state.intensity;
  if (out.event) {
    ojson e;
    e["kind"] = to_string(out.event->kind);
    e["centroid"] = ojson::array({out.event->centroid.x, out.event->centroid.y});
    e["region"] = out.event->region_label;
    if (out.event->kind == EventKind::kPressEnd) e["duration_frames"] = out.event->duration_frames;
    reply["event"] = std::move(e);
  }
  if (out.action) {
    reply["action"] = out.action->name;
    reply["amplitude"] = to_string(out.action->amplitude);
  }

  if (log_) {
    *log_ << io::state_to_jsonl(state) << '\n';
    if (out.event) *log_ << io::event_to_jsonl(*out.event, out.action) << '\n';
    log_->flush();
  }
  ++frame_;
  return reply.dump();
}

std::string websocket_accept_key(std::string_view client_key) {
  static constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  const std::string input = std::string(client_key) + std::string(kGuid);
  std::array<unsigned char, SHA_DIGEST_LENGTH> digest{};
  SHA1(reinterpret_cast<const unsigned char*>(input.data()), input.size(), digest.data());
  std::array<unsigned char, 4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1> encoded{};
  const int n = EVP_EncodeBlock(encoded.data(), digest.data(), SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<const char*>(encoded.data()), static_cast<std::size_t>(n));
}

SessionServer::SessionServer(const ReconstructionPipeline& pipeline, HmiSettings settings,
                             std::uint64_t noise_seed, Options options)
    : pipeline_(pipeline),
      settings_(std::move(settings)),
      noise_seed_(noise_seed),
      options_(std::move(options)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw EitError(ErrorCode::kInvalidArgument, "socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw EitError(ErrorCode::kInvalidArgument, "bad bind address " + options_.bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw EitError(ErrorCode::kInvalidArgument,
                   "cannot listen on port " + std::to_string(options_.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  if (options_.log_dir) std::filesystem::create_directories(*options_.log_dir);
}

SessionServer::~SessionServer() {
  stop();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void SessionServer::stop() {
  stopping_ = true;
  std::lock_guard lock(mutex_);
  for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
}

namespace {

// First session index whose log would not overwrite an earlier run's.
std::size_t first_free_session(const std::optional<std::filesystem::path>& dir) {
  std::size_t next = 0;
  if (!dir) return next;
  for (const auto& entry : std::filesystem::directory_iterator(*dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("session_", 0) != 0 || entry.path().extension() != ".jsonl") continue;
    const std::string digits = entry.path().stem().string().substr(8);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) continue;
    next = std::max(next, static_cast<std::size_t>(std::stoull(digits)) + 1);
  }
  return next;
}

}  // namespace

void SessionServer::serve() {
  std::size_t next_session = first_free_session(options_.log_dir);
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 100);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd, id = next_session++] { handle_connection(fd, id); });
  }
}

void SessionServer::handle_connection(int fd, std::size_t session_id) {
  std::unique_ptr<std::ofstream> log;
  if (options_.log_dir) {
    log = std::make_unique<std::ofstream>(*options_.log_dir /
                                          ("session_" + std::to_string(session_id) + ".jsonl"));
  }
  TouchSession session(pipeline_, settings_, noise_seed_, log.get());

  // Sniff the first bytes: "GET " opens a WebSocket upgrade, anything else
  // is line mode. A short first line must not stall the sniffing.
  std::string buf;
  bool have_data = true;
  while (buf.size() < 4 && buf.find('\n') == std::string::npos) {
    if (!recv_some(fd, buf)) {
      have_data = false;
      break;
    }
  }
  if (buf.compare(0, 4, "GET ") == 0) {
    // WebSocket: read the upgrade request headers.
    std::size_t end;
    while ((end = buf.find("\r\n\r\n")) == std::string::npos && buf.size() < 16384) {
      if (!recv_some(fd, buf)) break;
    }
    std::string key;
    if (end != std::string::npos) {
      std::size_t pos = buf.find("\r\n");
      while (pos < end) {
        const std::size_t next = buf.find("\r\n", pos + 2);
        const std::string line = buf.substr(pos + 2, next - pos - 2);
        const auto colon = line.find(':');
        if (colon != std::string::npos && lower(trim(line.substr(0, colon))) == "sec-websocket-key") {
          key = trim(std::string_view(line).substr(colon + 1));
        }
        pos = next;
      }
    }
    if (key.empty()) {
      send_all(fd, "HTTP/1.1 426 Upgrade Required\r\nConnection: close\r\n"
                   "Content-Length: 0\r\n\r\n");
    } else {
      buf.erase(0, end + 4);
      send_all(fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
                   "Connection: Upgrade\r\nSec-WebSocket-Accept: " +
                       websocket_accept_key(key) + "\r\n\r\n");
      std::string message;
      bool open = true;
      while (open && !stopping_) {
        if (!recv_exact(fd, buf, 2)) break;
        const auto b0 = static_cast<std::uint8_t>(buf[0]);
        const auto b1 = static_cast<std::uint8_t>(buf[1]);
        const bool fin = b0 & 0x80;
        const std::uint8_t opcode = b0 & 0x0f;
        const bool masked = b1 & 0x80;
        std::uint64_t len = b1 & 0x7f;
        std::size_t header = 2;
        if (len == 126) {
          if (!recv_exact(fd, buf, 4)) break;
          len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[2])) << 8) |
                static_cast<std::uint8_t>(buf[3]);
          header = 4;
        } else if (len == 127) {
          if (!recv_exact(fd, buf, 10)) break;
          len = 0;
          for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<std::uint8_t>(buf[2 + i]);
          header = 10;
        }
        if (len > kMaxMessageBytes) break;
        const std::size_t mask_at = header;
        if (masked) header += 4;
        if (!recv_exact(fd, buf, header + len)) break;
        std::string payload = buf.substr(header, len);
        if (masked) {
          for (std::size_t i = 0; i < payload.size(); ++i) payload[i] ^= buf[mask_at + i % 4];
        }
        buf.erase(0, header + len);

        switch (opcode) {
          case 0x0:
          case 0x1:
          case 0x2:
            message += payload;
            if (message.size() > kMaxMessageBytes) open = false;
            if (fin && open) {
              open = send_all(fd, ws_frame(0x1, session.handle(message)));
              message.clear();
            }
            break;
          case 0x8:
            send_all(fd, ws_frame(0x8, payload.substr(0, 2)));
            open = false;
            break;
          case 0x9:
            open = send_all(fd, ws_frame(0xA, payload));
            break;
          default:
            break;
        }
      }
    }
  } else if (have_data) {
    // Newline-delimited JSON.
    bool open = true;
    while (open) {
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!send_all(fd, session.handle(line) + "\n")) {
          open = false;
          break;
        }
      }
      if (!open || stopping_) break;
      if (buf.size() > kMaxMessageBytes) {
        send_all(fd, error_reply("message too long") + "\n");
        break;
      }
      if (!recv_some(fd, buf)) break;
    }
  }

  std::lock_guard lock(mutex_);
  client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd), client_fds_.end());
  ::close(fd);
}

}  // namespace tactile_eit
