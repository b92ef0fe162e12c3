#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <sys/types.h>

#include <nlohmann/json.hpp>

#include "newscls/corpus.hpp"

namespace newscls {

// Wire protocol v1: one JSON object per line over the child's stdin/stdout.
//   request:  {"id":<u64>,"op":"hello"|"fill"|"classify","payload":...}
//   success:  {"id":<u64>,"ok":true,"result":...}
//   failure:  {"id":<u64>,"ok":false,"error":"<msg>"}
//
//   hello    payload {"version":1}
//            result  {"version":<int>,"capabilities":["fill","classify"]}
//   fill     payload {"text":"... [MASK] ..."}
//            result  {"tokens":[<one string per mask, in order>]}
//   classify payload {"texts":[...],"labels":[...]}
//            result  {"scores":[[<one number per label>], ...]}
inline constexpr int kProtocolVersion = 1;
inline constexpr std::string_view kMaskToken = "[MASK]";

enum class Capability { kFill, kClassify };
using CapabilitySet = std::set<Capability>;

std::string_view to_string(Capability c);

// Source of contextual fill-ins for augmentation. Returns one token per
// kMaskToken occurrence in `masked_text`, in order.
class FillBackend {
 public:
  virtual ~FillBackend() = default;
  virtual std::vector<std::string> fill(std::string_view masked_text) = 0;
};

struct BackendOptions {
  // argv of the backend process; "{model}" in any element is replaced by
  // model_name.
  std::vector<std::string> command;
  std::string model_name;
  std::chrono::milliseconds timeout{30000};
};

std::size_t count_masks(std::string_view text);

// Client end of one backend process. Writes are serialized; responses are
// matched to requests by id, so several requests may be in flight and
// replies may arrive in any order.
class BackendHandle : public FillBackend {
 public:
  explicit BackendHandle(BackendOptions options);
  ~BackendHandle() override;

  BackendHandle(const BackendHandle&) = delete;
  BackendHandle& operator=(const BackendHandle&) = delete;

  // Sends `hello` and records the capabilities. Throws TimeoutError when
  // the backend does not answer within the timeout and ProtocolError on a
  // version mismatch.
  CapabilitySet handshake();
  const CapabilitySet& capabilities() const { return capabilities_; }
  const std::string& model_name() const { return options_.model_name; }

  std::vector<std::string> fill(std::string_view masked_text) override;
  std::vector<std::vector<double>> classify(
      const std::vector<std::string>& texts, const LabelSpace& space);

  // Low-level pipelining: send returns the request id; await blocks until
  // that id's reply arrives (stashing others) and returns its result.
  std::uint64_t send(std::string_view op, const nlohmann::json& payload);
  nlohmann::json await(std::uint64_t id);

  bool alive() const { return !dead_; }
  pid_t pid() const { return pid_; }

 private:
  nlohmann::json call(std::string_view op, const nlohmann::json& payload);
  void write_line(const std::string& line);
  // Reads one complete line before `deadline`.
  std::string read_line(std::chrono::steady_clock::time_point deadline);
  [[noreturn]] void fail(const std::string& what, bool timeout = false);
  void shutdown();

  BackendOptions options_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool dead_ = false;
  bool handshaken_ = false;
  std::uint64_t next_id_ = 1;
  std::string buffer_;
  std::set<std::uint64_t> outstanding_;
  std::map<std::uint64_t, nlohmann::json> arrived_;
  CapabilitySet capabilities_;
  std::mutex mutex_;
};

// Spawns the backend and performs the handshake.
std::unique_ptr<BackendHandle> connect_backend(BackendOptions options);

std::vector<std::string> request_fill(BackendHandle& handle,
                                      std::string_view masked_text);
std::vector<std::vector<double>> request_classify(
    BackendHandle& handle, const std::vector<std::string>& texts,
    const LabelSpace& space);

// language code -> pretrained model name. "multi" names the multilingual
// model.
using ModelRegistry = std::map<std::string, std::string>;

ModelRegistry load_registry(const std::filesystem::path& file);
ModelRegistry parse_registry(std::string_view content,
                             std::string_view source = "<memory>");
// Best model per language from the model comparison (bold entries), plus
// the multilingual model.
ModelRegistry default_registry();

}  // namespace newscls
