#include "foresttrav/label_io.hpp"

#include <fstream>
#include <sstream>

#include "foresttrav/error.hpp"
#include "foresttrav/io_util.hpp"

namespace foresttrav {

std::vector<LabeledVoxel> load_label_csv(const std::string& path,
                                         bool allow_unknown) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label file: " + path);
  std::vector<LabeledVoxel> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    LabeledVoxel v;
    char c1 = 0, c2 = 0, c3 = 0;
    std::string tag;
    if (!(ss >> v.key.x >> c1 >> v.key.y >> c2 >> v.key.z >> c3 >> tag) ||
        c1 != ',' || c2 != ',' || c3 != ',') {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 'i,j,k,label'");
    }
    if (tag == "TR") {
      v.label = TravLabel::kTraversable;
    } else if (tag == "NT") {
      v.label = TravLabel::kNonTraversable;
    } else if (allow_unknown && tag == "UNKNOWN") {
      v.label = TravLabel::kUnlabeled;
    } else {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": unknown label '" + tag + "'");
    }
    labels.push_back(v);
  }
  return labels;
}

void save_label_csv(const std::vector<LabeledVoxel>& labels,
                    const std::string& path, bool write_unknown) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open label file for writing: " + path);
  for (const LabeledVoxel& v : labels) {
    const char* tag = nullptr;
    switch (v.label) {
      case TravLabel::kTraversable:
        tag = "TR";
        break;
      case TravLabel::kNonTraversable:
        tag = "NT";
        break;
      case TravLabel::kUnlabeled:
        if (!write_unknown) continue;
        tag = "UNKNOWN";
        break;
    }
    out << v.key.x << ',' << v.key.y << ',' << v.key.z << ',' << tag << '\n';
  }
  if (!out) throw FormatError("write failure on label file: " + path);
}

namespace {
constexpr char kEventMagic[4] = {'F', 'T', 'E', 'V'};
constexpr uint16_t kEventVersion = 1;
}  // namespace

void save_events(const std::vector<PoseEvent>& events,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open event log for writing: " + path);
  write_magic(out, kEventMagic);
  write_le<uint16_t>(out, kEventVersion);
  write_le<uint64_t>(out, events.size());
  for (const PoseEvent& e : events) {
    write_le<double>(out, e.t);
    for (int i = 0; i < 3; ++i) {
      write_le<float>(out, static_cast<float>(e.pose.position[i]));
    }
    write_le<float>(out, static_cast<float>(e.pose.orientation.w()));
    write_le<float>(out, static_cast<float>(e.pose.orientation.x()));
    write_le<float>(out, static_cast<float>(e.pose.orientation.y()));
    write_le<float>(out, static_cast<float>(e.pose.orientation.z()));
    write_le<uint8_t>(out, e.state == TravLabel::kTraversable ? 1 : 0);
  }
  if (!out) throw FormatError("write failure on event log: " + path);
}

std::vector<PoseEvent> load_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open event log: " + path);
  expect_magic(in, kEventMagic, "event log");
  expect_version(in, kEventVersion, "event log");
  const uint64_t count = read_le<uint64_t>(in, "event count");
  std::vector<PoseEvent> events;
  events.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    PoseEvent e;
    e.t = read_le<double>(in, "event time");
    for (int a = 0; a < 3; ++a) {
      e.pose.position[a] = read_le<float>(in, "event position");
    }
    const float w = read_le<float>(in, "event quaternion");
    const float x = read_le<float>(in, "event quaternion");
    const float y = read_le<float>(in, "event quaternion");
    const float z = read_le<float>(in, "event quaternion");
    e.pose.orientation = Quat(w, x, y, z);
    e.state = read_le<uint8_t>(in, "event state") != 0
                  ? TravLabel::kTraversable
                  : TravLabel::kNonTraversable;
    events.push_back(e);
  }
  return events;
}

}  // namespace foresttrav
