#pragma once

#include <airl/error.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace airl {

struct MetricRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double momentum_m = 0.0;
  std::size_t queue_fill = 0;
  double feat_std = 0.0;
  double eff_rank = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr const char* kMetricsHeader = "step,loss,lr,momentum_m,queue_fill,feat_std,eff_rank";

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

// Shortest round-trip representation, so parsing gives back the exact values.
inline std::string format_row(const MetricRow& r) {
  return std::to_string(r.step) + "," + detail::shortest(r.loss) + "," + detail::shortest(r.lr) +
         "," + detail::shortest(r.momentum_m) + "," + std::to_string(r.queue_fill) + "," +
         detail::shortest(r.feat_std) + "," + detail::shortest(r.eff_rank);
}

inline MetricRow parse_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (f.size() != 7) throw FormatError("metrics row has " + std::to_string(f.size()) + " fields: " + line);
  auto num = [&](const std::string& s) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("bad number '" + s + "'");
    return v;
  };
  auto integer = [&](const std::string& s) {
    std::size_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("bad integer '" + s + "'");
    return v;
  };
  return {integer(f[0]), num(f[1]), num(f[2]), num(f[3]), integer(f[4]), num(f[5]), num(f[6])};
}

// Appends rows to a CSV file, writing the header when the file is new.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw FormatError("cannot open metrics file '" + path.string() + "'");
    if (fresh) out_ << kMetricsHeader << "\n";
  }

  void append(const MetricRow& r) {
    out_ << format_row(r) << "\n";
    out_.flush();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline std::vector<MetricRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open metrics file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw FormatError("metrics file '" + path.string() + "' has an unexpected header");
  std::vector<MetricRow> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_row(line));
  return rows;
}

}  // namespace airl
