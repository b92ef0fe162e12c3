// Binary model format, version 1. All integers little-endian; doubles are
// stored as their IEEE-754 bit patterns.
//
//   magic "NWSCLMDL" | u32 version
//   u8 kind | u8 has_subtask | u8 subtask
//   u32 n_labels | n_labels x (u32 len, bytes)
//   u32 hash_dim | i32 ngram_min | i32 ngram_max | u8 lowercase | u64 max_tokens
//   f64 threshold | u32 n | n x f64 per-label thresholds
//   n_labels x f64 bias
//   u32 n_columns | n_columns x (u32 feature, n_labels x f64)
//
// Columns whose weights are all +0.0 are omitted.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "newscls/classifier.hpp"
#include "newscls/error.hpp"

namespace newscls {

namespace {

constexpr std::string_view kMagic = "NWSCLMDL";
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw FormatError(
          fmt::format("model file truncated at byte {}", pos_), pos_);
    }
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const LinearModel& model) {
  Writer w;
  w.raw(kMagic);
  w.u32(kVersion);
  const auto& space = model.label_space();
  w.u8(space.kind() == LabelKind::kMulticlass ? 0 : 1);
  w.u8(space.subtask() ? 1 : 0);
  w.u8(space.subtask() ? static_cast<std::uint8_t>(*space.subtask()) : 0);
  w.u32(static_cast<std::uint32_t>(space.size()));
  for (const auto& l : space.labels()) w.str(l);
  const auto& f = model.featurizer();
  w.u32(f.hash_dim);
  w.u32(static_cast<std::uint32_t>(f.ngram_min));
  w.u32(static_cast<std::uint32_t>(f.ngram_max));
  w.u8(f.lowercase ? 1 : 0);
  w.u64(f.max_tokens);
  w.f64(model.threshold());
  w.u32(static_cast<std::uint32_t>(model.label_thresholds().size()));
  for (double t : model.label_thresholds()) w.f64(t);
  for (double b : model.bias()) w.f64(b);

  const auto L = model.num_labels();
  const auto weights = model.weights();
  std::vector<std::uint32_t> columns;
  for (std::uint32_t c = 0; c < model.hash_dim(); ++c) {
    for (std::size_t l = 0; l < L; ++l) {
      if (std::bit_cast<std::uint64_t>(weights[std::size_t(c) * L + l]) != 0) {
        columns.push_back(c);
        break;
      }
    }
  }
  w.u32(static_cast<std::uint32_t>(columns.size()));
  for (auto c : columns) {
    w.u32(c);
    for (std::size_t l = 0; l < L; ++l) w.f64(weights[std::size_t(c) * L + l]);
  }
  return w.take();
}

LinearModel deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(kMagic.size()) != kMagic) {
    throw FormatError("not a model file (bad magic)", 0);
  }
  const auto version = r.u32();
  if (version != kVersion) {
    throw MigrationError(fmt::format(
        "model format version {} is not supported (expected {})", version,
        kVersion));
  }
  const auto kind = r.u8() == 0 ? LabelKind::kMulticlass : LabelKind::kMultilabel;
  const bool has_subtask = r.u8() != 0;
  const auto subtask_raw = r.u8();
  if (subtask_raw > 2) throw FormatError("bad subtask code", r.pos() - 1);
  std::vector<std::string> labels(r.u32());
  for (auto& l : labels) l = r.str();
  std::optional<Subtask> subtask;
  if (has_subtask) subtask = static_cast<Subtask>(subtask_raw);
  LabelSpace space(kind, std::move(labels), subtask);

  FeaturizerConfig f;
  f.hash_dim = r.u32();
  f.ngram_min = static_cast<int>(r.u32());
  f.ngram_max = static_cast<int>(r.u32());
  f.lowercase = r.u8() != 0;
  f.max_tokens = r.u64();
  const double threshold = r.f64();
  std::vector<double> label_thresholds(r.u32());
  for (auto& t : label_thresholds) t = r.f64();

  LinearModel model(std::move(space), f, threshold);
  model.set_label_thresholds(std::move(label_thresholds));
  for (auto& b : model.bias()) b = r.f64();
  const auto L = model.num_labels();
  auto weights = model.weights();
  const auto n_columns = r.u32();
  for (std::uint32_t i = 0; i < n_columns; ++i) {
    const auto c = r.u32();
    if (c >= model.hash_dim()) {
      throw FormatError(fmt::format("column {} out of range", c), r.pos() - 4);
    }
    for (std::size_t l = 0; l < L; ++l) weights[std::size_t(c) * L + l] = r.f64();
  }
  if (!r.done()) {
    throw FormatError(fmt::format("trailing bytes after byte {}", r.pos()),
                      r.pos());
  }
  return model;
}

void save_model(const LinearModel& model, const std::filesystem::path& file) {
  const auto bytes = serialize_model(model);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", file.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("error writing '{}'", file.string()));
}

LinearModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace newscls
