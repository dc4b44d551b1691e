#pragma once

#include "costalign/geom.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace costalign::io {

/// ASCII "XYZL": one point per line `x y z [label]`, `#` comments, label
/// defaults to -1. A cloud where every label is -1 is returned unlabeled.
PointCloud read_xyzl(std::istream& in);
PointCloud read_xyzl(const std::filesystem::path& path);

/// Writes with 17 significant digits so that a read-back is exact.
void write_xyzl(std::ostream& out, const PointCloud& cloud);
void write_xyzl(const std::filesystem::path& path, const PointCloud& cloud);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace costalign::io
