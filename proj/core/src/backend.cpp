#include "newscls/backend.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>
#include <glog/logging.h>

#include "newscls/error.hpp"

extern char** environ;

namespace newscls {

namespace {

using Clock = std::chrono::steady_clock;

std::string substitute_model(std::string arg, const std::string& model) {
  const std::string key = "{model}";
  for (auto pos = arg.find(key); pos != std::string::npos;
       pos = arg.find(key, pos + model.size())) {
    arg.replace(pos, key.size(), model);
  }
  return arg;
}

// Blocks SIGPIPE for the calling thread while writing, so a dead reader
// shows up as EPIPE instead of killing the process.
class SigpipeGuard {
 public:
  SigpipeGuard() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGPIPE);
    pthread_sigmask(SIG_BLOCK, &set_, &old_);
  }
  ~SigpipeGuard() {
    if (broke_) {
      timespec zero{0, 0};
      while (sigtimedwait(&set_, nullptr, &zero) > 0) {
      }
    }
    pthread_sigmask(SIG_SETMASK, &old_, nullptr);
  }
  void broke() { broke_ = true; }

 private:
  sigset_t set_{}, old_{};
  bool broke_ = false;
};

}  // namespace

std::string_view to_string(Capability c) {
  return c == Capability::kFill ? "fill" : "classify";
}

std::size_t count_masks(std::string_view text) {
  std::size_t n = 0;
  for (auto pos = text.find(kMaskToken); pos != std::string_view::npos;
       pos = text.find(kMaskToken, pos + kMaskToken.size())) {
    ++n;
  }
  return n;
}

BackendHandle::BackendHandle(BackendOptions options)
    : options_(std::move(options)) {
  if (options_.command.empty()) throw ValidationError("empty backend command");
  int in_pipe[2], out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) {
    throw IoError(fmt::format("pipe: {}", std::strerror(errno)));
  }
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw IoError(fmt::format("pipe: {}", std::strerror(errno)));
  }
  std::vector<std::string> args;
  for (const auto& a : options_.command) {
    args.push_back(substitute_model(a, options_.model_name));
  }
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  const int rc =
      posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    pid_ = -1;
    throw IoError(fmt::format("cannot start backend '{}': {}", args.front(),
                              std::strerror(rc)));
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

BackendHandle::~BackendHandle() { shutdown(); }

void BackendHandle::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  to_child_ = -1;
  if (pid_ > 0) {
    // Closing stdin asks the backend to exit; give it a moment.
    int status = 0;
    const auto deadline = Clock::now() + std::chrono::milliseconds(500);
    while (waitpid(pid_, &status, WNOHANG) == 0) {
      if (Clock::now() > deadline) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
  }
  if (from_child_ >= 0) close(from_child_);
  from_child_ = -1;
  dead_ = true;
}

void BackendHandle::fail(const std::string& what, bool timeout) {
  const auto msg = fmt::format("backend '{}': {}", options_.command.front(), what);
  if (timeout) throw TimeoutError(msg);
  throw ProtocolError(msg);
}

void BackendHandle::write_line(const std::string& line) {
  if (dead_) fail("backend is not running");
  SigpipeGuard guard;
  std::size_t done = 0;
  while (done < line.size()) {
    const auto n = ::write(to_child_, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE) guard.broke();
      dead_ = true;
      fail(fmt::format("write failed: {}", std::strerror(errno)));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string BackendHandle::read_line(Clock::time_point deadline) {
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (left.count() <= 0) {
      // A late reply would desynchronize the stream; drop the process.
      if (pid_ > 0) kill(pid_, SIGKILL);
      shutdown();
      fail(fmt::format("no response within {} ms", options_.timeout.count()),
           true);
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      fail(fmt::format("poll failed: {}", std::strerror(errno)));
    }
    if (rc == 0) continue;  // deadline re-checked above
    char chunk[4096];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      dead_ = true;
      fail(fmt::format("read failed: {}", std::strerror(errno)));
    }
    if (n == 0) {
      dead_ = true;
      fail("backend exited before responding");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::uint64_t BackendHandle::send(std::string_view op,
                                  const nlohmann::json& payload) {
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  nlohmann::json msg = {{"id", id}, {"op", op}, {"payload", payload}};
  write_line(msg.dump() + "\n");
  outstanding_.insert(id);
  return id;
}

nlohmann::json BackendHandle::await(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  if (!outstanding_.count(id)) {
    fail(fmt::format("no outstanding request with id {}", id));
  }
  const auto deadline = Clock::now() + options_.timeout;
  while (!arrived_.count(id)) {
    const auto line = read_line(deadline);
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(fmt::format("malformed response line: {}", e.what()));
    }
    if (!reply.is_object() || !reply.contains("id") ||
        !reply["id"].is_number_unsigned() || !reply.contains("ok") ||
        !reply["ok"].is_boolean()) {
      fail(fmt::format("response lacks id/ok fields: {}", line));
    }
    const auto rid = reply["id"].get<std::uint64_t>();
    if (!outstanding_.count(rid) || arrived_.count(rid)) {
      fail(fmt::format("response for unknown request id {}", rid));
    }
    arrived_.emplace(rid, std::move(reply));
  }
  auto reply = std::move(arrived_.at(id));
  arrived_.erase(id);
  outstanding_.erase(id);
  if (!reply["ok"].get<bool>()) {
    const auto msg = reply.contains("error") && reply["error"].is_string()
                         ? reply["error"].get<std::string>()
                         : std::string("unspecified error");
    fail(fmt::format("request {} failed: {}", id, msg));
  }
  if (!reply.contains("result")) {
    fail(fmt::format("response {} has no result", id));
  }
  return std::move(reply["result"]);
}

nlohmann::json BackendHandle::call(std::string_view op,
                                   const nlohmann::json& payload) {
  return await(send(op, payload));
}

CapabilitySet BackendHandle::handshake() {
  const auto result = call("hello", {{"version", kProtocolVersion}});
  if (!result.is_object() || !result.contains("version") ||
      !result["version"].is_number_integer()) {
    fail("hello result lacks a protocol version");
  }
  const int version = result["version"].get<int>();
  if (version != kProtocolVersion) {
    fail(fmt::format("protocol version mismatch: client speaks {}, backend {}",
                     kProtocolVersion, version));
  }
  CapabilitySet caps;
  if (result.contains("capabilities") && result["capabilities"].is_array()) {
    for (const auto& c : result["capabilities"]) {
      if (!c.is_string()) continue;
      if (c == "fill") {
        caps.insert(Capability::kFill);
      } else if (c == "classify") {
        caps.insert(Capability::kClassify);
      } else {
        LOG(WARNING) << "backend advertises unknown capability " << c;
      }
    }
  }
  capabilities_ = caps;
  handshaken_ = true;
  return caps;
}

std::vector<std::string> BackendHandle::fill(std::string_view masked_text) {
  if (!handshaken_ || !capabilities_.count(Capability::kFill)) {
    fail("backend does not offer 'fill'");
  }
  const auto masks = count_masks(masked_text);
  if (masks == 0) return {};
  const auto result = call("fill", {{"text", masked_text}});
  if (!result.contains("tokens") || !result["tokens"].is_array()) {
    fail("fill result lacks a token list");
  }
  std::vector<std::string> tokens;
  for (const auto& t : result["tokens"]) {
    if (!t.is_string()) fail("fill token is not a string");
    tokens.push_back(t.get<std::string>());
  }
  if (tokens.size() != masks) {
    fail(fmt::format("fill returned {} tokens for {} masks", tokens.size(),
                     masks));
  }
  return tokens;
}

std::vector<std::vector<double>> BackendHandle::classify(
    const std::vector<std::string>& texts, const LabelSpace& space) {
  if (!handshaken_ || !capabilities_.count(Capability::kClassify)) {
    fail("backend does not offer 'classify'");
  }
  if (texts.empty()) return {};
  const auto result =
      call("classify", {{"texts", texts}, {"labels", space.labels()}});
  if (!result.contains("scores") || !result["scores"].is_array()) {
    fail("classify result lacks a score list");
  }
  const auto& scores = result["scores"];
  if (scores.size() != texts.size()) {
    fail(fmt::format("classify returned {} score vectors for {} texts",
                     scores.size(), texts.size()));
  }
  std::vector<std::vector<double>> out;
  for (const auto& row : scores) {
    if (!row.is_array() || row.size() != space.size()) {
      fail(fmt::format("score vector length {} does not match {} labels",
                       row.is_array() ? row.size() : 0, space.size()));
    }
    std::vector<double> v;
    for (const auto& x : row) {
      if (!x.is_number()) fail("score is not a number");
      v.push_back(x.get<double>());
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::unique_ptr<BackendHandle> connect_backend(BackendOptions options) {
  auto handle = std::make_unique<BackendHandle>(std::move(options));
  handle->handshake();
  return handle;
}

std::vector<std::string> request_fill(BackendHandle& handle,
                                      std::string_view masked_text) {
  return handle.fill(masked_text);
}

std::vector<std::vector<double>> request_classify(
    BackendHandle& handle, const std::vector<std::string>& texts,
    const LabelSpace& space) {
  return handle.classify(texts, space);
}

ModelRegistry parse_registry(std::string_view content,
                             std::string_view source) {
  ModelRegistry reg;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ValidationError(fmt::format(
          "{}:{}: expected 'language<TAB>model_name'", source, line_no));
    }
    if (!reg.emplace(line.substr(0, tab), line.substr(tab + 1)).second) {
      throw ValidationError(fmt::format("{}:{}: duplicate language '{}'",
                                        source, line_no, line.substr(0, tab)));
    }
  }
  return reg;
}

ModelRegistry load_registry(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_registry(ss.str(), file.string());
}

ModelRegistry default_registry() {
  return {
      {"multi", "xlm-roberta-large"},
      {"en", "roberta-large"},
      {"fr", "dbmdz/bert-base-french-europeana-cased"},
      {"ge", "uklfr/gottbert-base"},
      {"it", "dbmdz/bert-base-italian-uncased"},
      {"po", "allegro/herbert-large-cased"},
      {"ru", "DeepPavlov/rubert-base-cased"},
  };
}

}  // namespace newscls
