#include "foresttrav/eval_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "foresttrav/error.hpp"

namespace foresttrav {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.precision(10);
  return out;
}

}  // namespace

void write_temporal_csv(const std::vector<TemporalPoint>& points,
                        const std::string& path) {
  auto out = open_out(path);
  out << "t,mcc,f1,coverage\n";
  for (const auto& p : points) {
    out << p.t << ",";
    if (p.has_metrics) {
      out << p.mcc << "," << p.f1;
    } else {
      out << ",";
    }
    out << "," << p.coverage << "\n";
  }
}

std::vector<TemporalPoint> load_temporal_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<TemporalPoint> points;
  std::string line;
  if (!std::getline(in, line) || line != "t,mcc,f1,coverage") {
    throw FormatError(path + ": missing temporal CSV header");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 4) fields.emplace_back();
    if (fields.size() != 4) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 4 fields");
    }
    TemporalPoint p;
    p.t = std::stod(fields[0]);
    p.has_metrics = !fields[1].empty() && !fields[2].empty();
    if (p.has_metrics) {
      p.mcc = std::stod(fields[1]);
      p.f1 = std::stod(fields[2]);
    }
    p.coverage = fields[3].empty() ? 0.0 : std::stod(fields[3]);
    points.push_back(p);
  }
  return points;
}

void write_kfold_csv(const std::vector<FoldMetrics>& folds,
                     const std::string& path) {
  auto out = open_out(path);
  out << "fold,mcc,f1\n";
  for (const auto& f : folds) {
    out << f.fold << "," << f.mcc << "," << f.f1 << "\n";
  }
}

void write_density_csv(const std::vector<DensityBin>& bins,
                       const std::string& path) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,mcc,count\n";
  for (const auto& b : bins) {
    out << b.lo << "," << b.hi << "," << b.mcc << "," << b.count << "\n";
  }
}

namespace {

std::vector<std::pair<VoxelKey, float>> sorted_entries(
    const ProbabilityMap& probabilities) {
  std::vector<std::pair<VoxelKey, float>> entries(probabilities.begin(),
                                                  probabilities.end());
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return entries;
}

}  // namespace

void save_te_map(const TeMap& te, const std::string& path) {
  auto out = open_out(path);
  out << "resolution," << te.resolution << "\n";
  out << "x,y,z,probability\n";
  for (const auto& [key, p] : sorted_entries(te.probabilities)) {
    out << key.x << "," << key.y << "," << key.z << "," << p << "\n";
  }
}

TeMap load_te_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("resolution,", 0) != 0) {
    throw FormatError(path + ": missing resolution line");
  }
  TeMap te;
  try {
    te.resolution = std::stod(line.substr(11));
  } catch (const std::exception&) {
    throw FormatError(path + ": unreadable resolution value");
  }
  if (te.resolution <= 0.0) {
    throw FormatError(path + ": resolution must be positive");
  }
  if (!std::getline(in, line) || line != "x,y,z,probability") {
    throw FormatError(path + ": missing estimate CSV header");
  }
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 4 fields");
    }
    try {
      const VoxelKey key{std::stoi(fields[0]), std::stoi(fields[1]),
                         std::stoi(fields[2])};
      const float p = std::stof(fields[3]);
      if (p < 0.0f || p > 1.0f) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": probability outside [0, 1]");
      }
      te.probabilities[key] = p;
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": unreadable estimate row");
    }
  }
  return te;
}

void write_te_ply(const TeMap& te, const std::string& path) {
  const auto entries = sorted_entries(te.probabilities);
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << entries.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (const auto& [key, p] : entries) {
    const double cx = (key.x + 0.5) * te.resolution;
    const double cy = (key.y + 0.5) * te.resolution;
    const double cz = (key.z + 0.5) * te.resolution;
    const int green = static_cast<int>(std::lround(255.0 * p));
    out << cx << " " << cy << " " << cz << " " << (255 - green) << " " << green
        << " 0\n";
  }
}

void write_grid_pgm(const std::map<ColumnKey, TravLabel>& grid,
                    const std::string& path) {
  if (grid.empty()) throw DataError("write_grid_pgm: empty grid");
  std::int32_t min_x = std::numeric_limits<std::int32_t>::max();
  std::int32_t max_x = std::numeric_limits<std::int32_t>::min();
  std::int32_t min_y = min_x, max_y = max_x;
  for (const auto& [xy, state] : grid) {
    min_x = std::min(min_x, xy.first);
    max_x = std::max(max_x, xy.first);
    min_y = std::min(min_y, xy.second);
    max_y = std::max(max_y, xy.second);
  }
  const int width = max_x - min_x + 1;
  const int height = max_y - min_y + 1;
  auto out = open_out(path);
  out << "P2\n" << width << " " << height << "\n255\n";
  for (std::int32_t y = max_y; y >= min_y; --y) {
    for (std::int32_t x = min_x; x <= max_x; ++x) {
      const auto it = grid.find({x, y});
      int value = 128;
      if (it != grid.end()) {
        value = it->second == TravLabel::kTraversable ? 255 : 0;
      }
      out << value << (x == max_x ? "\n" : " ");
    }
  }
}

void write_grid_csv(const std::map<ColumnKey, TravLabel>& grid,
                    const std::string& path) {
  auto out = open_out(path);
  out << "x,y,state\n";
  for (const auto& [xy, state] : grid) {
    out << xy.first << "," << xy.second << ","
        << (state == TravLabel::kTraversable ? "TR" : "NT") << "\n";
  }
}

}  // namespace foresttrav
