#include <chrono>

#include <gtest/gtest.h>

#include "newscls/backend.hpp"
#include "newscls/error.hpp"
#include "synth.hpp"

namespace newscls {
namespace {

using namespace std::chrono_literals;

BackendOptions echo(std::vector<std::string> extra = {},
                    std::chrono::milliseconds timeout = 5000ms) {
  std::vector<std::string> cmd{testing::echo_backend_path().string(), "--model",
                               "{model}"};
  cmd.insert(cmd.end(), extra.begin(), extra.end());
  return {cmd, "tiny-model", timeout};
}

LabelSpace frames() {
  return LabelSpace(LabelKind::kMultilabel, {"Economic", "Morality", "Policy"});
}

TEST(Backend, CountMasks) {
  EXPECT_EQ(count_masks(""), 0u);
  EXPECT_EQ(count_masks("a [MASK] b [MASK]"), 2u);
  EXPECT_EQ(count_masks("[MASK][MASK]"), 2u);
  EXPECT_EQ(count_masks("[MASK"), 0u);
}

TEST(Backend, HandshakeCapabilities) {
  auto h = connect_backend(echo());
  EXPECT_EQ(h->capabilities(), (CapabilitySet{Capability::kFill, Capability::kClassify}));
  EXPECT_EQ(h->model_name(), "tiny-model");
  EXPECT_TRUE(h->alive());
  auto fill_only = connect_backend(echo({"--caps", "fill,translate"}));
  EXPECT_EQ(fill_only->capabilities(), CapabilitySet{Capability::kFill});
  EXPECT_THROW(fill_only->classify({"x"}, frames()), ProtocolError);
}

TEST(Backend, VersionMismatch) {
  EXPECT_THROW(connect_backend(echo({"--version", "2"})), ProtocolError);
}

TEST(Backend, MissingExecutable) {
  EXPECT_THROW(connect_backend({{"/nonexistent/backend"}, "m", 1000ms}), Error);
  EXPECT_THROW(BackendHandle({{}, "m", 1000ms}), ValidationError);
}

TEST(Backend, FillAndClassify) {
  auto h = connect_backend(echo({"--fill-token", "tok"}));
  EXPECT_EQ(h->fill("a [MASK] b [MASK] c"), (std::vector<std::string>{"tok", "tok"}));
  EXPECT_TRUE(h->fill("no masks").empty());
  const auto scores =
      request_classify(*h, {"policy and ECONOMIC news", "nothing"}, frames());
  EXPECT_EQ(scores, (std::vector<std::vector<double>>{{1, 0, 1}, {0, 0, 0}}));
  EXPECT_EQ(request_fill(*h, "[MASK]"), std::vector<std::string>{"tok"});
}

TEST(Backend, ReplyIdsMatchRequests) {
  auto h = connect_backend(echo());
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < 5; ++i) {
    ids.push_back(h->send("fill", {{"text", std::string(i + 1, 'x') + " [MASK]"}}));
  }
  // Await in reverse; earlier replies are stashed.
  for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
    EXPECT_EQ(h->await(*it).at("tokens").size(), 1u);
  }
  EXPECT_THROW(h->await(ids.front()), ProtocolError);
}

TEST(Backend, OutOfOrderRepliesPreserveRequestOrder) {
  BackendHandle h(echo({"--swap", "--fill-token", "s"}));
  const auto a = h.send("classify", {{"texts", {"alpha"}}, {"labels", {"alpha", "beta"}}});
  const auto b = h.send("classify", {{"texts", {"beta"}}, {"labels", {"alpha", "beta"}}});
  EXPECT_EQ(h.await(a).at("scores"), nlohmann::json::parse("[[1.0,0.0]]"));
  EXPECT_EQ(h.await(b).at("scores"), nlohmann::json::parse("[[0.0,1.0]]"));
}

TEST(Backend, HangSurfacesTimeout) {
  auto h = connect_backend(echo({"--hang", "fill"}, 300ms));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(h->fill("[MASK]"), TimeoutError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
  EXPECT_FALSE(h->alive());
  EXPECT_THROW(h->fill("[MASK]"), ProtocolError);
}

TEST(Backend, HandshakeTimeout) {
  EXPECT_THROW(connect_backend(echo({"--hang", "hello"}, 300ms)), TimeoutError);
}

TEST(Backend, ExitSurfacesProtocolError) {
  auto h = connect_backend(echo({"--exit-on", "classify"}));
  try {
    h->classify({"x"}, frames());
    FAIL();
  } catch (const TimeoutError&) {
    FAIL() << "exit reported as timeout";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("exited"), std::string::npos);
  }
}

TEST(Backend, MalformedReplies) {
  EXPECT_THROW(connect_backend(echo({"--bad-length"}))->fill("[MASK] [MASK]"),
               ProtocolError);
  EXPECT_THROW(connect_backend(echo({"--bad-length"}))->classify({"x"}, frames()),
               ProtocolError);
  EXPECT_THROW(connect_backend(echo({"--wrong-id"})), ProtocolError);
  EXPECT_THROW(connect_backend(echo({"--fail-fill"}))->fill("[MASK]"), ProtocolError);
}

TEST(Backend, SlowBackendWithinTimeout) {
  auto h = connect_backend(echo({"--delay-ms", "50"}, 2000ms));
  EXPECT_EQ(h->fill("[MASK]").size(), 1u);
}

TEST(Registry, ParseAndDefaults) {
  const auto reg = parse_registry("# c\nmulti\txlm\nen\troberta\n");
  EXPECT_EQ(reg, (ModelRegistry{{"multi", "xlm"}, {"en", "roberta"}}));
  EXPECT_THROW(parse_registry("en roberta\n"), ValidationError);
  EXPECT_THROW(parse_registry("en\ta\nen\tb\n"), ValidationError);
  EXPECT_EQ(load_registry(testing::config_dir() / "registry.tsv"), default_registry());
  EXPECT_EQ(default_registry().at("multi"), "xlm-roberta-large");
  EXPECT_EQ(default_registry().at("en"), "roberta-large");
  EXPECT_THROW(load_registry("/nonexistent/registry.tsv"), IoError);
}

}  // namespace
}  // namespace newscls
