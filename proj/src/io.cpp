#include "costalign/io.hpp"

#include "costalign/error.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace costalign::io {

PointCloud read_xyzl(std::istream& in) {
  PointCloud cloud;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double x = 0, y = 0, z = 0;
    if (!(ls >> x >> y >> z)) {
      throw Error(ErrorCode::ParseError, "expected `x y z [label]`", {{"line", std::to_string(line_no)}});
    }
    int lab = label::kUnassigned;
    if (!(ls >> lab)) {
      if (!ls.eof()) {
        throw Error(ErrorCode::ParseError, "bad label field", {{"line", std::to_string(line_no)}});
      }
      lab = label::kUnassigned;
    }
    cloud.points.emplace_back(x, y, z);
    labels.push_back(lab);
  }
  if (std::any_of(labels.begin(), labels.end(), [](int l) { return l != label::kUnassigned; })) {
    cloud.labels = std::move(labels);
  }
  cloud.validate();
  return cloud;
}

PointCloud read_xyzl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open point cloud", {{"path", path.string()}});
  try {
    return read_xyzl(in);
  } catch (const Error& e) {
    auto ctx = e.context();
    ctx["path"] = path.string();
    throw Error(e.code(), e.what(), ctx);
  }
}

void write_xyzl(std::ostream& out, const PointCloud& cloud) {
  out << "# x y z label\n" << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << cloud.label_at(i) << '\n';
  }
}

void write_xyzl(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write point cloud", {{"path", path.string()}});
  write_xyzl(out, cloud);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open file", {{"path", path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write file", {{"path", path.string()}});
  out << text;
}

}  // namespace costalign::io
