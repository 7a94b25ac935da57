#include "dfal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

#include "dfal/errors.hpp"
#include "dfal/seed.hpp"

namespace dfal {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& file) {
  if (offset + 4 > bytes.size())
    throw FormatError(file + ": truncated header at byte " + std::to_string(offset), offset);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& token, double& out) {
  if (token.empty()) return false;
  const char* first = token.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(out);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

void Dataset::validate() const {
  if (inputs.size() != labels.size())
    throw InvalidInput(name + ": " + std::to_string(inputs.size()) + " inputs but " +
                       std::to_string(labels.size()) + " labels");
  if (class_count == 0) throw InvalidInput(name + ": class_count must be positive");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != input_shape)
      throw InvalidInput(name + ": item " + std::to_string(i) + " has shape " +
                         shape_string(inputs[i].shape()) + ", expected " +
                         shape_string(input_shape));
    if (labels[i] >= class_count)
      throw InvalidInput(name + ": item " + std::to_string(i) + " label out of range");
  }
  const auto counts = class_counts();
  for (std::size_t c = 0; c < class_count; ++c)
    if (counts[c] == 0) throw InvalidInput(name + ": class " + std::to_string(c) + " is absent");
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_count, 0);
  for (std::size_t l : labels)
    if (l < class_count) ++counts[l];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{name, input_shape, class_count, {}, {}};
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

std::vector<std::reference_wrapper<const Tensor>> Dataset::refs() const {
  return {inputs.begin(), inputs.end()};
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t class_count) {
  const auto img = read_bytes(images);
  const auto lab = read_bytes(labels);
  const std::string img_name = images.filename().string();
  const std::string lab_name = labels.filename().string();

  const std::uint32_t img_magic = read_be32(img, 0, img_name);
  if (img_magic != kImageMagic)
    throw FormatError(img_name + ": bad image magic at byte 0", 0);
  const std::size_t n = read_be32(img, 4, img_name);
  const std::size_t rows = read_be32(img, 8, img_name);
  const std::size_t cols = read_be32(img, 12, img_name);
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + n * pixels)
    throw FormatError(img_name + ": truncated payload at byte " + std::to_string(img.size()) +
                          ", expected " + std::to_string(16 + n * pixels) + " bytes",
                      img.size());

  if (read_be32(lab, 0, lab_name) != kLabelMagic)
    throw FormatError(lab_name + ": bad label magic at byte 0", 0);
  const std::size_t n_labels = read_be32(lab, 4, lab_name);
  if (n_labels != n)
    throw FormatError(lab_name + ": count " + std::to_string(n_labels) + " at byte 4 does not match " +
                          std::to_string(n) + " images",
                      4);
  if (lab.size() < 8 + n)
    throw FormatError(lab_name + ": truncated payload at byte " + std::to_string(lab.size()),
                      lab.size());

  Dataset out{images.stem().string(), {1, rows, cols}, class_count, {}, {}};
  out.inputs.reserve(n);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = lab[8 + i];
    if (label >= class_count)
      throw FormatError(lab_name + ": label " + std::to_string(label) + " at byte " +
                            std::to_string(8 + i) + " exceeds class count",
                        8 + i);
    std::vector<double> v(pixels);
    const unsigned char* src = img.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) v[p] = src[p] / 255.0;
    out.inputs.emplace_back(out.input_shape, std::move(v));
    out.labels.push_back(label);
  }
  out.validate();
  return out;
}

void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  const Shape& s = data.input_shape;
  std::size_t rows = 0, cols = 0;
  if (s.size() == 3 && s[0] == 1) {
    rows = s[1];
    cols = s[2];
  } else if (s.size() == 2) {
    rows = s[0];
    cols = s[1];
  } else {
    throw InvalidInput("IDX images need a single-channel 2-D shape, got " + shape_string(s));
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw InvalidInput("cannot write IDX files");
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.inputs[i].values()) {
      const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
      img.put(static_cast<char>(static_cast<unsigned char>(q)));
    }
    lab.put(static_cast<char>(static_cast<unsigned char>(data.labels[i])));
  }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

Dataset load_csv(const std::filesystem::path& path, std::size_t class_count) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  const std::string file = path.filename().string();

  Dataset out{path.stem().string(), {}, class_count, {}, {}};
  std::size_t dim = 0;
  std::string line;
  std::size_t row = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_row(line);
    double label_value = 0.0;
    const bool numeric_first = parse_double(fields[0], label_value);
    if (first_content) {
      first_content = false;
      if (!numeric_first) continue;  // header
    }
    const std::string where = file + ": row " + std::to_string(row);
    if (!numeric_first) throw FormatError(where + ": non-numeric label '" + fields[0] + "'", row);
    if (fields.size() < 2) throw FormatError(where + ": no feature values", row);
    if (dim == 0) {
      dim = fields.size() - 1;
    } else if (fields.size() - 1 != dim) {
      throw FormatError(where + ": has " + std::to_string(fields.size() - 1) +
                            " values, expected " + std::to_string(dim),
                        row);
    }
    if (label_value < 0 || label_value != std::floor(label_value) ||
        label_value >= static_cast<double>(class_count))
      throw FormatError(where + ": label " + fields[0] + " out of range", row);
    std::vector<double> v(dim);
    for (std::size_t j = 0; j < dim; ++j)
      if (!parse_double(fields[j + 1], v[j]))
        throw FormatError(where + ": non-numeric value '" + fields[j + 1] + "'", row);
    out.inputs.push_back(Tensor::vector(std::move(v)));
    out.labels.push_back(static_cast<std::size_t>(label_value));
  }
  if (out.inputs.empty()) throw FormatError(file + ": no data rows", row);
  out.input_shape = {dim};
  out.validate();
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  const std::size_t dim = shape_size(data.input_shape);
  out << "label";
  for (std::size_t j = 0; j < dim; ++j) out << ",x" << j;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.inputs[i].values()) out << ',' << v;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic blobs and splits
// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (class_count < 2) throw InvalidInput("synthetic class_count must be at least 2");
  if (points_per_class == 0) throw InvalidInput("synthetic points_per_class must be positive");
  if (dimension < 2) throw InvalidInput("synthetic dimension must be at least 2");
  if (!(scale >= 0.0) || !std::isfinite(scale))
    throw InvalidInput("synthetic scale must be finite and nonnegative");
}

Dataset gen_blobs(const SyntheticSpec& spec) {
  spec.validate();
  Dataset out{"blobs", {spec.dimension}, spec.class_count, {}, {}};
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                         static_cast<double>(spec.class_count);
    std::vector<double> center(spec.dimension, 0.0);
    center[0] = spec.center_radius * std::cos(angle);
    center[1] = spec.center_radius * std::sin(angle);
    for (std::size_t i = 0; i < spec.points_per_class; ++i) {
      std::vector<double> v = center;
      for (double& x : v) x += spec.scale * noise(rng);
      out.inputs.push_back(Tensor::vector(std::move(v)));
      out.labels.push_back(c);
    }
  }
  return out;
}

std::vector<std::size_t> stratified_sample(std::span<const std::size_t> labels,
                                           std::size_t class_count, std::size_t count,
                                           std::uint64_t seed) {
  if (count > labels.size()) throw InvalidInput("cannot sample more items than available");
  std::vector<std::vector<std::size_t>> by_class(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(labels[i]).push_back(i);
  std::mt19937_64 rng(seed);
  for (auto& members : by_class) std::shuffle(members.begin(), members.end(), rng);

  std::vector<std::size_t> picked;
  picked.reserve(count);
  for (std::size_t round = 0; picked.size() < count; ++round)
    for (std::size_t c = 0; c < class_count && picked.size() < count; ++c)
      if (round < by_class[c].size()) picked.push_back(by_class[c][round]);
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::pair<Dataset, Dataset> split_and_subsample(const Dataset& train, const Dataset& test,
                                                std::size_t pool_cap, std::uint64_t seed) {
  if (pool_cap == 0 || pool_cap == train.size()) return {train, test};
  if (pool_cap < train.class_count)
    throw InvalidInput("pool_cap " + std::to_string(pool_cap) + " is below the class count");
  if (pool_cap > train.size())
    throw InvalidInput("pool_cap " + std::to_string(pool_cap) + " exceeds the " +
                       std::to_string(train.size()) + " available training items");
  const auto picked = stratified_sample(train.labels, train.class_count, pool_cap, seed);
  return {train.subset(picked), test};
}

std::pair<Dataset, Dataset> split_and_subsample(const Dataset& data, double test_fraction,
                                                std::size_t pool_cap, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidInput("test_fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(data.class_count);
  for (std::size_t i = 0; i < data.size(); ++i) by_class.at(data.labels[i]).push_back(i);
  std::mt19937_64 rng(derive_seed(seed, {0x5e11}));
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + n_test);
    train_idx.insert(train_idx.end(), members.begin() + n_test, members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  Dataset train = data.subset(train_idx);
  Dataset test = data.subset(test_idx);
  train.name = data.name + "-train";
  test.name = data.name + "-test";
  return split_and_subsample(train, test, pool_cap, seed);
}

double accuracy(const Network& net, const Dataset& data, Execution exec) {
  if (data.size() == 0) return 0.0;
  std::vector<char> correct(data.size(), 0);
  for_each_index(data.size(), exec,
                 [&](std::size_t i) { correct[i] = net.predict(data.inputs[i]) == data.labels[i]; });
  const auto hits = std::count(correct.begin(), correct.end(), 1);
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace dfal
