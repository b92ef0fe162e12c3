#include "newscls/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <glog/logging.h>
#include <nlohmann/json.hpp>

#include "newscls/error.hpp"
#include "newscls/rng.hpp"

namespace newscls {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\v\f";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kWhitespace);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("error reading '{}'", file.string()));
  return ss.str();
}

void write_file(const fs::path& file, std::string_view content) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", file.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError(fmt::format("error writing '{}'", file.string()));
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c >= '0' && c <= '9';
  });
}

// Numeric ids first in numeric order, then the rest lexicographically.
bool id_less(const std::string& a, const std::string& b) {
  const bool na = all_digits(a), nb = all_digits(b);
  if (na != nb) return na;
  if (na && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

std::size_t parse_index(std::string_view s, std::string_view source,
                        std::size_t line) {
  std::size_t value = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || value == 0) {
    throw ValidationError(fmt::format(
        "{}:{}: paragraph index '{}' is not a positive integer", source,
        line, s));
  }
  return value;
}

// Splits "<article>#<index>" at the last '#'.
std::pair<std::string, std::size_t> split_paragraph_unit(
    std::string_view unit_id) {
  const auto pos = unit_id.rfind('#');
  if (pos == std::string_view::npos) {
    throw ValidationError(
        fmt::format("'{}' is not a paragraph unit id", unit_id));
  }
  return {std::string(unit_id.substr(0, pos)),
          parse_index(unit_id.substr(pos + 1), unit_id, 0)};
}

bool paragraph_level(const LabelSpace& space) {
  return space.subtask() && is_paragraph_level(*space.subtask());
}

bool safe_article_id(std::string_view id) {
  return !id.empty() && id.find_first_of("/\\#:~\t\n") == std::string_view::npos;
}

// Whether every unit id maps onto `article<ID>.txt` files and back.
bool fits_article_layout(const Dataset& dataset) {
  const bool paragraphs = paragraph_level(dataset.label_space());
  for (const auto& inst : dataset.instances()) {
    if (!paragraphs) {
      if (!safe_article_id(inst.unit_id)) return false;
      continue;
    }
    const auto pos = inst.unit_id.rfind('#');
    if (pos == std::string::npos ||
        !safe_article_id(std::string_view(inst.unit_id).substr(0, pos)) ||
        !all_digits(std::string_view(inst.unit_id).substr(pos + 1)) ||
        inst.unit_id[pos + 1] == '0') {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string_view to_string(Subtask subtask) {
  switch (subtask) {
    case Subtask::kS1: return "S1";
    case Subtask::kS2: return "S2";
    case Subtask::kS3: return "S3";
  }
  return "?";
}

std::string_view to_string(LabelKind kind) {
  return kind == LabelKind::kMulticlass ? "multiclass" : "multilabel";
}

Subtask parse_subtask(std::string_view text) {
  std::string s(trim(text));
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s.rfind("subtask", 0) == 0) s = s.substr(7);
  if (!s.empty() && s[0] == 's') s = s.substr(1);
  if (s == "1") return Subtask::kS1;
  if (s == "2") return Subtask::kS2;
  if (s == "3") return Subtask::kS3;
  throw ValidationError(fmt::format("unknown subtask '{}'", text));
}

LabelKind parse_label_kind(std::string_view text) {
  const auto s = trim(text);
  if (s == "multiclass") return LabelKind::kMulticlass;
  if (s == "multilabel") return LabelKind::kMultilabel;
  throw ValidationError(fmt::format("unknown label kind '{}'", text));
}

std::size_t expected_label_count(Subtask subtask) {
  switch (subtask) {
    case Subtask::kS1: return 3;
    case Subtask::kS2: return 14;
    case Subtask::kS3: return 23;
  }
  return 0;
}

LabelKind expected_kind(Subtask subtask) {
  return subtask == Subtask::kS1 ? LabelKind::kMulticlass
                                 : LabelKind::kMultilabel;
}

LabelSpace::LabelSpace(LabelKind kind, std::vector<std::string> labels,
                       std::optional<Subtask> subtask)
    : subtask_(subtask), kind_(kind), labels_(std::move(labels)) {
  if (labels_.empty()) throw ValidationError("label space has no labels");
  if (subtask_) {
    if (kind_ != expected_kind(*subtask_)) {
      throw ValidationError(fmt::format("{} is {}, not {}",
                                        to_string(*subtask_),
                                        to_string(expected_kind(*subtask_)),
                                        to_string(kind_)));
    }
    const auto expected = expected_label_count(*subtask_);
    if (labels_.size() != expected) {
      throw ValidationError(fmt::format(
          "{} label space: expected {} labels, got {}", to_string(*subtask_),
          expected, labels_.size()));
    }
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const auto& l = labels_[i];
    if (l.empty() || trim(l) != l ||
        l.find_first_of(",\t\n\r") != std::string::npos) {
      throw ValidationError(fmt::format("invalid label string '{}'", l));
    }
    if (!index_.emplace(l, i).second) {
      throw ValidationError(fmt::format("duplicate label '{}'", l));
    }
  }
}

std::optional<std::size_t> LabelSpace::index_of(std::string_view label) const {
  const auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Dataset::Dataset(std::set<std::string> languages,
                 std::vector<LabeledInstance> instances,
                 LabelSpace label_space)
    : languages_(std::move(languages)),
      instances_(std::move(instances)),
      label_space_(std::move(label_space)) {
  std::set<std::string_view> seen;
  for (const auto& inst : instances_) {
    if (!seen.insert(inst.unit_id).second) {
      throw ValidationError(
          fmt::format("duplicate unit id '{}' in dataset", inst.unit_id));
    }
    if (!label_space_.multilabel() && inst.labels.size() != 1) {
      throw ValidationError(fmt::format(
          "unit '{}': multiclass instance needs exactly one label, has {}",
          inst.unit_id, inst.labels.size()));
    }
    for (const auto& l : inst.labels) {
      if (!label_space_.contains(l)) {
        throw ValidationError(
            fmt::format("unit '{}': unknown label '{}'", inst.unit_id, l));
      }
    }
  }
}

std::string paragraph_unit_id(std::string_view article_id,
                              std::size_t paragraph_index) {
  return fmt::format("{}#{}", article_id, paragraph_index);
}

std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> paragraphs;
  std::string current;
  auto flush = [&] {
    const auto t = trim(current);
    if (!t.empty()) paragraphs.emplace_back(t);
    current.clear();
  };
  for (auto line : split_on(text, '\n')) {
    if (trim(line).empty()) {
      flush();
      continue;
    }
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!current.empty()) current.push_back('\n');
    current.append(line);
  }
  flush();
  return paragraphs;
}

std::vector<Document> parse_documents(const fs::path& dir,
                                      std::string_view language) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError(fmt::format("'{}' is not a readable directory", dir.string()));
  }
  std::vector<Document> docs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    constexpr std::string_view prefix = "article", suffix = ".txt";
    if (name.size() <= prefix.size() + suffix.size() ||
        name.compare(0, prefix.size(), prefix) != 0 ||
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    Document doc;
    doc.id = name.substr(prefix.size(),
                         name.size() - prefix.size() - suffix.size());
    doc.language = std::string(language);
    doc.paragraphs = split_paragraphs(read_file(entry.path()));
    if (doc.paragraphs.empty()) {
      throw FormatError(fmt::format("article {} ({}) is empty", doc.id,
                                    entry.path().string()));
    }
    docs.push_back(std::move(doc));
  }
  std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
    return id_less(a.id, b.id);
  });
  return docs;
}

LabelMap parse_labels_text(std::string_view content, const LabelSpace& space,
                           std::string_view source) {
  const bool paragraphs = paragraph_level(space);
  LabelMap out;
  std::size_t line_no = 0;
  for (auto line : split_on(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    auto fields = split_on(line, '\t');
    const std::size_t id_fields = paragraphs ? 2 : 1;
    if (fields.size() == id_fields && space.multilabel()) {
      fields.emplace_back();  // missing trailing empty label field
    }
    if (fields.size() != id_fields + 1) {
      throw ValidationError(fmt::format("{}:{}: expected {} fields, got {}",
                                        source, line_no, id_fields + 1,
                                        fields.size()));
    }
    const auto article = trim(fields[0]);
    if (article.empty()) {
      throw ValidationError(
          fmt::format("{}:{}: empty article id", source, line_no));
    }
    std::string unit_id =
        paragraphs ? paragraph_unit_id(
                         article, parse_index(trim(fields[1]), source, line_no))
                   : std::string(article);
    LabelSet labels;
    const auto label_field = trim(fields.back());
    if (!label_field.empty()) {
      for (auto raw : split_on(label_field, ',')) {
        const auto label = trim(raw);
        if (label.empty()) continue;
        if (!space.contains(label)) {
          throw ValidationError(fmt::format("{}:{}: unknown label '{}'",
                                            source, line_no, label));
        }
        labels.emplace(label);
      }
    }
    if (!space.multilabel() && labels.size() != 1) {
      throw ValidationError(fmt::format(
          "{}:{}: multiclass row needs exactly one label, got {}", source,
          line_no, labels.size()));
    }
    if (!out.emplace(unit_id, std::move(labels)).second) {
      throw ValidationError(fmt::format("{}:{}: duplicate row for unit '{}'",
                                        source, line_no, unit_id));
    }
  }
  return out;
}

LabelMap parse_labels(const fs::path& file, const LabelSpace& space) {
  return parse_labels_text(read_file(file), space, file.string());
}

LabelSpace parse_label_space(std::string_view content,
                             std::string_view source) {
  std::vector<std::string> lines;
  for (auto line : split_on(content, '\n')) {
    const auto t = trim(line);
    if (!t.empty()) lines.emplace_back(t);
  }
  if (lines.empty()) {
    throw ValidationError(fmt::format("{}: missing header line", source));
  }
  const auto header = split_on(lines.front(), '\t');
  if (header.size() != 2) {
    throw ValidationError(fmt::format(
        "{}: header must be 'subtask<TAB>kind', got '{}'", source,
        lines.front()));
  }
  std::vector<std::string> labels(lines.begin() + 1, lines.end());
  const auto kind = parse_label_kind(header[1]);
  if (trim(header[0]) == "custom") return LabelSpace(kind, std::move(labels));
  const auto subtask = parse_subtask(header[0]);
  if (kind != expected_kind(subtask)) {
    throw ValidationError(fmt::format("{}: {} must be {}", source,
                                      to_string(subtask),
                                      to_string(expected_kind(subtask))));
  }
  if (labels.size() != expected_label_count(subtask)) {
    throw ValidationError(fmt::format("{}: {} expected {} labels, got {}",
                                      source, to_string(subtask),
                                      expected_label_count(subtask),
                                      labels.size()));
  }
  return LabelSpace(kind, std::move(labels), subtask);
}

LabelSpace load_label_space(const fs::path& file) {
  return parse_label_space(read_file(file), file.string());
}

BindResult bind(const std::vector<Document>& documents, const LabelMap& labels,
                const LabelSpace& space) {
  const bool paragraphs = paragraph_level(space);
  std::map<std::string, const Document*> by_id;
  std::set<std::string> languages;
  for (const auto& doc : documents) {
    if (!by_id.emplace(doc.id, &doc).second) {
      throw ValidationError(fmt::format("duplicate article id '{}'", doc.id));
    }
    languages.insert(doc.language);
  }
  // Every label row must point at an existing unit.
  for (const auto& [unit_id, _] : labels) {
    if (paragraphs) {
      const auto [article, index] = split_paragraph_unit(unit_id);
      const auto it = by_id.find(article);
      if (it == by_id.end()) {
        throw ValidationError(
            fmt::format("label for unknown article '{}'", article));
      }
      if (index > it->second->paragraphs.size()) {
        throw ValidationError(fmt::format(
            "label for paragraph {} of article '{}', which has {} paragraphs",
            index, article, it->second->paragraphs.size()));
      }
    } else if (!by_id.count(unit_id)) {
      throw ValidationError(
          fmt::format("label for unknown article '{}'", unit_id));
    }
  }

  BindResult result;
  std::vector<LabeledInstance> instances;
  auto add = [&](std::string unit_id, std::string text) {
    const auto it = labels.find(unit_id);
    if (it == labels.end()) {
      ++result.dropped;
      return;
    }
    instances.push_back({std::move(unit_id), std::move(text), it->second});
  };
  for (const auto& doc : documents) {
    if (paragraphs) {
      for (std::size_t p = 0; p < doc.paragraphs.size(); ++p) {
        add(paragraph_unit_id(doc.id, p + 1), doc.paragraphs[p]);
      }
    } else {
      std::string text;
      for (const auto& para : doc.paragraphs) {
        if (!text.empty()) text.push_back('\n');
        text += para;
      }
      add(doc.id, std::move(text));
    }
  }
  if (result.dropped > 0) {
    LOG(WARNING) << "bind: dropped " << result.dropped
                 << " unit(s) without labels";
  }
  result.dataset =
      Dataset(std::move(languages), std::move(instances), space);
  return result;
}

std::vector<Unit> units_of(const std::vector<Document>& documents,
                           Subtask subtask) {
  std::vector<Unit> units;
  for (const auto& doc : documents) {
    if (is_paragraph_level(subtask)) {
      for (std::size_t p = 0; p < doc.paragraphs.size(); ++p) {
        units.push_back({paragraph_unit_id(doc.id, p + 1), doc.paragraphs[p]});
      }
    } else {
      std::string text;
      for (const auto& para : doc.paragraphs) {
        if (!text.empty()) text.push_back('\n');
        text += para;
      }
      units.push_back({doc.id, std::move(text)});
    }
  }
  return units;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset,
                                  const SplitConfig& cfg) {
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ValidationError(fmt::format(
        "train fraction must lie in (0, 1), got {}", cfg.train_fraction));
  }
  const auto n = dataset.size();
  if (n < 2) {
    throw ValidationError(
        fmt::format("cannot split a dataset of {} instance(s)", n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed);
  rng.shuffle(order.begin(), order.end());

  // The epsilon keeps exact products such as 0.29 * 100 from flooring one
  // short because of binary rounding.
  const auto n_train = static_cast<std::size_t>(
      std::floor(cfg.train_fraction * static_cast<double>(n) + 1e-9));
  std::vector<LabeledInstance> train, validation;
  train.reserve(n_train);
  validation.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    auto& side = i < n_train ? train : validation;
    side.push_back(dataset.instances()[order[i]]);
  }
  return {Dataset(dataset.languages(), std::move(train), dataset.label_space()),
          Dataset(dataset.languages(), std::move(validation),
                  dataset.label_space())};
}

Dataset merge_multilingual(const std::vector<Dataset>& datasets) {
  if (datasets.empty()) throw ValidationError("nothing to merge");
  const auto& first = datasets.front();
  std::set<std::string> languages;
  std::vector<LabeledInstance> instances;
  for (const auto& ds : datasets) {
    if (ds.subtask() != first.subtask()) {
      throw ValidationError(fmt::format(
          "cannot merge {} data with {} data",
          first.subtask() ? to_string(*first.subtask()) : "custom",
          ds.subtask() ? to_string(*ds.subtask()) : "custom"));
    }
    if (!(ds.label_space() == first.label_space())) {
      throw ValidationError("cannot merge datasets with different label spaces");
    }
    if (ds.languages().size() != 1) {
      throw ValidationError(
          "merge inputs must each hold exactly one language");
    }
    const auto& lang = *ds.languages().begin();
    languages.insert(lang);
    for (const auto& inst : ds.instances()) {
      instances.push_back(
          {fmt::format("{}:{}", lang, inst.unit_id), inst.text, inst.labels});
    }
  }
  return Dataset(std::move(languages), std::move(instances),
                 first.label_space());
}

std::string format_label_space(const LabelSpace& space) {
  std::string out = fmt::format(
      "{}\t{}\n",
      space.subtask() ? to_string(*space.subtask()) : "custom",
      to_string(space.kind()));
  for (const auto& l : space.labels()) out += l + "\n";
  return out;
}

void write_label_space(const LabelSpace& space, const fs::path& file) {
  write_file(file, format_label_space(space));
}

std::string format_label_row(std::string_view unit_id, const LabelSet& labels,
                             const LabelSpace& space) {
  std::vector<std::size_t> idx;
  for (const auto& l : labels) {
    const auto i = space.index_of(l);
    if (!i) throw ValidationError(fmt::format("unknown label '{}'", l));
    idx.push_back(*i);
  }
  std::sort(idx.begin(), idx.end());
  std::string joined;
  for (auto i : idx) {
    if (!joined.empty()) joined.push_back(',');
    joined += space.label(i);
  }
  if (paragraph_level(space)) {
    const auto [article, index] = split_paragraph_unit(unit_id);
    return fmt::format("{}\t{}\t{}\n", article, index, joined);
  }
  return fmt::format("{}\t{}\n", unit_id, joined);
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  const auto articles = dir / "articles";
  fs::remove_all(articles);
  fs::remove(dir / "instances.jsonl");
  fs::remove(dir / "labels.tsv");
  fs::create_directories(dir);
  const auto& space = dataset.label_space();
  write_label_space(space, dir / "labelspace.tsv");
  std::string langs;
  for (const auto& l : dataset.languages()) langs += l + "\n";
  write_file(dir / "languages.txt", langs);

  if (!fits_article_layout(dataset)) {
    std::string lines;
    for (const auto& inst : dataset.instances()) {
      nlohmann::json j = {{"unit_id", inst.unit_id},
                          {"text", inst.text},
                          {"labels", inst.labels}};
      lines += j.dump() + "\n";
    }
    write_file(dir / "instances.jsonl", lines);
    return;
  }
  fs::create_directories(articles);
  std::string labels;
  if (paragraph_level(space)) {
    // article id -> paragraph index -> text
    std::map<std::string, std::map<std::size_t, std::string>> grouped;
    for (const auto& inst : dataset.instances()) {
      const auto [article, index] = split_paragraph_unit(inst.unit_id);
      grouped[article][index] = inst.text;
    }
    for (const auto& [article, paras] : grouped) {
      const auto last = paras.rbegin()->first;
      std::string body;
      for (std::size_t i = 1; i <= last; ++i) {
        const auto it = paras.find(i);
        if (i > 1) body += "\n\n";
        body += it == paras.end() ? std::string("-") : it->second;
      }
      body.push_back('\n');
      write_file(articles / fmt::format("article{}.txt", article), body);
    }
  } else {
    for (const auto& inst : dataset.instances()) {
      std::string body;
      for (auto line : split_on(inst.text, '\n')) {
        if (!body.empty()) body += "\n\n";
        body.append(line);
      }
      body.push_back('\n');
      write_file(articles / fmt::format("article{}.txt", inst.unit_id), body);
    }
  }
  for (const auto& inst : dataset.instances()) {
    labels += format_label_row(inst.unit_id, inst.labels, space);
  }
  write_file(dir / "labels.tsv", labels);
}

Dataset read_dataset(const fs::path& dir) {
  const auto space = parse_label_space(read_file(dir / "labelspace.tsv"),
                                       (dir / "labelspace.tsv").string());
  std::set<std::string> languages;
  for (auto line : split_on(read_file(dir / "languages.txt"), '\n')) {
    const auto t = trim(line);
    if (!t.empty()) languages.emplace(t);
  }
  if (fs::exists(dir / "instances.jsonl")) {
    std::vector<LabeledInstance> instances;
    const auto content = read_file(dir / "instances.jsonl");
    std::size_t offset = 0;
    for (auto line : split_on(content, '\n')) {
      if (!trim(line).empty()) {
        try {
          const auto j = nlohmann::json::parse(line);
          instances.push_back({j.at("unit_id").get<std::string>(),
                               j.at("text").get<std::string>(),
                               j.at("labels").get<LabelSet>()});
        } catch (const nlohmann::json::exception& e) {
          throw FormatError(
              fmt::format("{}: bad record at byte {}: {}",
                          (dir / "instances.jsonl").string(), offset, e.what()),
              offset);
        }
      }
      offset += line.size() + 1;
    }
    return Dataset(std::move(languages), std::move(instances), space);
  }
  const std::string language =
      languages.size() == 1 ? *languages.begin() : std::string("mul");
  const auto docs = parse_documents(dir / "articles", language);
  const auto labels = parse_labels(dir / "labels.tsv", space);
  // Preserve the instance order recorded in labels.tsv.
  std::vector<std::string> order;
  const auto content = read_file(dir / "labels.tsv");
  for (auto line : split_on(content, '\n')) {
    if (trim(line).empty()) continue;
    const auto fields = split_on(line, '\t');
    order.push_back(paragraph_level(space)
                        ? paragraph_unit_id(trim(fields[0]),
                                            parse_index(trim(fields[1]),
                                                        "labels.tsv", 0))
                        : std::string(trim(fields[0])));
  }
  auto bound = bind(docs, labels, space).dataset;
  std::map<std::string, const LabeledInstance*> by_id;
  for (const auto& inst : bound.instances()) by_id[inst.unit_id] = &inst;
  std::vector<LabeledInstance> instances;
  instances.reserve(order.size());
  for (const auto& id : order) instances.push_back(*by_id.at(id));
  return Dataset(std::move(languages), std::move(instances), space);
}

}  // namespace newscls
