#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/workload.hpp"

namespace fedsim {

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4))
    throw ConfigError("truncated IDX header in " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::size_t infer_classes(const std::vector<std::uint32_t>& labels, std::optional<std::size_t> n) {
  if (labels.empty()) throw ConfigError("dataset is empty");
  const std::size_t seen = *std::max_element(labels.begin(), labels.end()) + 1;
  if (n) {
    if (seen > *n) throw ConfigError("label exceeds configured class count");
    return *n;
  }
  return seen;
}

}  // namespace

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::optional<std::size_t> num_classes) {
  auto img = open_in(images);
  if (read_be32(img, images) != kIdxImageMagic)
    throw ConfigError(images.string() + ": bad IDX image magic");
  const std::size_t n = read_be32(img, images);
  const std::size_t rows = read_be32(img, images);
  const std::size_t cols = read_be32(img, images);

  auto lab = open_in(labels);
  if (read_be32(lab, labels) != kIdxLabelMagic)
    throw ConfigError(labels.string() + ": bad IDX label magic");
  if (read_be32(lab, labels) != n) throw ConfigError("IDX image and label counts differ");

  Dataset d;
  d.num_features = rows * cols;
  std::vector<unsigned char> pixels(n * d.num_features);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
    throw ConfigError(images.string() + ": truncated pixel data");
  std::vector<unsigned char> raw(n);
  if (!lab.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n)))
    throw ConfigError(labels.string() + ": truncated label data");

  d.features.resize(pixels.size());
  std::transform(pixels.begin(), pixels.end(), d.features.begin(),
                 [](unsigned char p) { return static_cast<double>(p) / 255.0; });
  d.labels.assign(raw.begin(), raw.end());
  d.num_classes = infer_classes(d.labels, num_classes);
  return d;
}

void write_idx_dataset(const Dataset& data, const std::filesystem::path& images,
                       const std::filesystem::path& labels, std::size_t rows, std::size_t cols) {
  if (rows * cols != data.num_features) throw ContractViolation("rows * cols != feature count");
  auto img = open_out(images);
  write_be32(img, kIdxImageMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (double v : data.features) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    img.put(static_cast<char>(static_cast<unsigned char>(clamped * 255.0 + 0.5)));
  }
  auto lab = open_out(labels);
  write_be32(lab, kIdxLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (auto l : data.labels) lab.put(static_cast<char>(static_cast<unsigned char>(l)));
}

void write_csv_dataset(const Dataset& data, const std::filesystem::path& path) {
  auto out = open_out(path);
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.row(i)) out << ',' << v;
    out << '\n';
  }
}

Dataset read_csv_dataset(const std::filesystem::path& path, std::optional<std::size_t> num_classes) {
  auto in = open_in(path);
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    std::uint32_t label = 0;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
        if (ec != std::errc{} || p != cell.data() + cell.size())
          throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad label");
        first = false;
        continue;
      }
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad feature '" + cell + "'");
      }
    }
    if (d.labels.empty()) d.num_features = row.size();
    if (row.size() != d.num_features || row.empty())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    d.labels.push_back(label);
    d.features.insert(d.features.end(), row.begin(), row.end());
  }
  d.num_classes = infer_classes(d.labels, num_classes);
  return d;
}

}  // namespace fedsim
