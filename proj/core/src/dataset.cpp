#include "imil/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "imil/errors.hpp"
#include "imil/image_io.hpp"
#include "imil/rng.hpp"

namespace imil {
namespace {

void check_label(int label, std::string_view id) {
  if (label < 0 || label >= kNumClasses) {
    throw ValidationError("sample '" + std::string(id) + "' has label " + std::to_string(label) +
                          " outside {0,1}");
  }
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// RFC 4180 subset: comma separated, optional double quotes with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  fields.push_back(trim(field));
  return fields;
}

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated store file");
  return value;
}

constexpr char kStoreMagic[8] = {'I', 'M', 'I', 'L', 'S', 'T', 'R', '1'};

}  // namespace

TrainingStore::TrainingStore(SplitTag tag, std::vector<LabeledImage> samples)
    : split_(tag), samples_(std::move(samples)) {
  index_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    check_label(s.label, s.id);
    if (!index_.emplace(s.id, i).second) {
      throw ValidationError("duplicate sample id '" + s.id + "'");
    }
  }
}

bool TrainingStore::contains(std::string_view id) const {
  return index_.find(std::string(id)) != index_.end();
}

std::size_t TrainingStore::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) throw NotFoundError("no sample with id '" + std::string(id) + "'");
  return it->second;
}

const LabeledImage& TrainingStore::at(std::string_view id) const { return samples_[index_of(id)]; }

void TrainingStore::replace(std::string_view id, Image pixels) {
  auto& sample = samples_[index_of(id)];
  if (!sample.pixels.same_shape(pixels)) {
    throw ValidationError("replacement for '" + sample.id + "' has a different shape");
  }
  sample.pixels = std::move(pixels);
  sample.replaced = true;
}

TrainingStore load_manifest(const std::filesystem::path& manifest,
                            const std::filesystem::path& image_root, const LoadOptions& options) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("manifest is empty");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (split_csv_line(line) != std::vector<std::string>{"id", "filepath", "label"}) {
    throw ValidationError("manifest header must be 'id,filepath,label'");
  }

  struct Row {
    std::string id;
    std::filesystem::path path;
    int label;
  };
  std::vector<Row> rows;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = "manifest line " + std::to_string(line_no);
    if (fields.size() != 3) throw ValidationError(where + ": expected 3 fields");
    if (fields[0].empty()) throw ValidationError(where + ": empty id");
    if (!seen.emplace(fields[0], rows.size()).second) {
      throw ValidationError("duplicate sample id '" + fields[0] + "' (" + where + ")");
    }
    int label = -1;
    std::size_t consumed = 0;
    try {
      label = std::stoi(fields[2], &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed == 0 || consumed != fields[2].size()) {
      throw ValidationError("sample '" + fields[0] + "': label '" + fields[2] +
                            "' is not an integer");
    }
    check_label(label, fields[0]);
    std::filesystem::path path = fields[1];
    if (path.is_relative()) path = image_root / path;
    rows.push_back({fields[0], std::move(path), label});
  }

  std::vector<LabeledImage> samples;
  samples.reserve(rows.size());
  for (auto& row : rows) {
    if (!std::filesystem::exists(row.path)) {
      throw IoError("sample '" + row.id + "': missing file " + row.path.string());
    }
    Image pixels;
    try {
      pixels = read_png(row.path, options.channels);
    } catch (const IoError& e) {
      throw IoError("sample '" + row.id + "': " + e.what());
    }
    pixels = resize_bilinear(pixels, options.image_size, options.image_size);
    for (auto& v : pixels.data) v = std::clamp(v, 0.0, 1.0);
    samples.push_back({std::move(row.id), std::move(pixels), row.label, false});
  }
  return TrainingStore(SplitTag::train, std::move(samples));
}

void export_manifest(const TrainingStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.csv").string());
  manifest << "id,filepath,label\n";
  for (const auto& sample : store) {
    const std::string rel = "images/" + sample.id + ".png";
    write_png(dir / rel, sample.pixels);
    manifest << sample.id << ',' << rel << ',' << sample.label << '\n';
  }
}

std::pair<TrainingStore, TrainingStore> split_dataset(const TrainingStore& store,
                                                      double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie strictly between 0 and 1");
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < store.size(); ++i) by_class[store[i].label].push_back(i);
  for (int c = 0; c < kNumClasses; ++c) {
    if (by_class[c].size() < 2) {
      throw ValidationError("split needs at least 2 samples of class " + std::to_string(c));
    }
  }

  // Largest-remainder apportionment of round(n * fraction) across classes.
  const auto total_train = static_cast<std::size_t>(std::llround(store.size() * train_fraction));
  std::array<std::size_t, kNumClasses> quota{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double exact = by_class[c].size() * train_fraction;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - quota[c];
    assigned += quota[c];
  }
  std::array<int, kNumClasses> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total_train && k < order.size(); ++k) {
    if (quota[order[k]] < by_class[order[k]].size()) {
      ++quota[order[k]];
      ++assigned;
    }
  }

  auto rng = make_rng(seed, {stream::kSplit});
  std::vector<char> is_train(store.size(), 0);
  for (int c = 0; c < kNumClasses; ++c) {
    auto members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < quota[c]; ++k) is_train[members[k]] = 1;
  }

  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
  for (std::size_t i = 0; i < store.size(); ++i) {
    (is_train[i] ? train : test).push_back(store[i]);
  }
  return {TrainingStore(SplitTag::train, std::move(train)),
          TrainingStore(SplitTag::test, std::move(test))};
}

void save_store(const TrainingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kStoreMagic, sizeof(kStoreMagic));
  put<std::uint8_t>(out, store.split() == SplitTag::train ? 0 : 1);
  put<std::uint64_t>(out, store.size());
  for (const auto& s : store) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.id.size()));
    out.write(s.id.data(), static_cast<std::streamsize>(s.id.size()));
    put<std::int32_t>(out, s.label);
    put<std::uint8_t>(out, s.replaced ? 1 : 0);
    put<std::int32_t>(out, s.pixels.channels);
    put<std::int32_t>(out, s.pixels.height);
    put<std::int32_t>(out, s.pixels.width);
    out.write(reinterpret_cast<const char*>(s.pixels.data.data()),
              static_cast<std::streamsize>(s.pixels.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to " + path.string());
}

TrainingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof(kStoreMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kStoreMagic, sizeof(magic)) != 0) {
    throw IoError(path.string() + " is not a store file");
  }
  const auto tag = get<std::uint8_t>(in) == 0 ? SplitTag::train : SplitTag::test;
  const auto count = get<std::uint64_t>(in);
  std::vector<LabeledImage> samples;
  samples.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    LabeledImage s;
    s.id.resize(get<std::uint32_t>(in));
    in.read(s.id.data(), static_cast<std::streamsize>(s.id.size()));
    s.label = get<std::int32_t>(in);
    s.replaced = get<std::uint8_t>(in) != 0;
    const int c = get<std::int32_t>(in);
    const int h = get<std::int32_t>(in);
    const int w = get<std::int32_t>(in);
    s.pixels = Image(c, h, w);
    in.read(reinterpret_cast<char*>(s.pixels.data.data()),
            static_cast<std::streamsize>(s.pixels.data.size() * sizeof(double)));
    if (!in) throw IoError("truncated store file " + path.string());
    samples.push_back(std::move(s));
  }
  return TrainingStore(tag, std::move(samples));
}

}  // namespace imil
