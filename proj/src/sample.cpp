#include "logcave/sample.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "logcave/error.hpp"

namespace logcave {

Sample Sample::make_1d(std::vector<double> xs) {
  for (double v : xs) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "sample values must be finite");
  }
  Sample s;
  s.dim_ = 1;
  s.coords_ = std::move(xs);
  return s;
}

Sample Sample::make_2d(const std::vector<Point2>& points) {
  Sample s;
  s.dim_ = 2;
  s.coords_.reserve(2 * points.size());
  for (const auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
      throw Error(ErrorCode::kInvalidInput, "sample values must be finite");
    }
    s.coords_.push_back(p[0]);
    s.coords_.push_back(p[1]);
  }
  return s;
}

std::vector<Point2> Sample::points_2d() const {
  std::vector<Point2> out(n());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = point(i);
  return out;
}

Sample Sample::affine(double scale, const Point2& shift) const {
  Sample s = *this;
  for (std::size_t i = 0; i < s.coords_.size(); ++i) {
    s.coords_[i] = scale * s.coords_[i] + shift[i % dim_];
  }
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

}  // namespace

Sample read_sample_csv(std::istream& in, bool header) {
  std::string line;
  std::vector<double> coords;
  int dim = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (header && row == 1) continue;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    const int cols = static_cast<int>(fields.size());
    if (dim == 0) {
      if (cols != 1 && cols != 2) {
        throw Error(ErrorCode::kInvalidInput,
                    "row " + std::to_string(row) + ": expected 1 or 2 columns, got " + std::to_string(cols));
      }
      dim = cols;
    } else if (cols != dim) {
      throw Error(ErrorCode::kInvalidInput, "row " + std::to_string(row) + ": expected " +
                                                std::to_string(dim) + " columns, got " + std::to_string(cols));
    }
    for (const auto& f : fields) {
      double v;
      if (!parse_double(f, v)) {
        throw Error(ErrorCode::kInvalidInput, "row " + std::to_string(row) + ": not a finite number: '" + trim(f) + "'");
      }
      coords.push_back(v);
    }
  }
  if (dim == 0) throw Error(ErrorCode::kInvalidInput, "sample file has no data rows");
  if (dim == 1) return Sample::make_1d(std::move(coords));
  std::vector<Point2> pts(coords.size() / 2);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {coords[2 * i], coords[2 * i + 1]};
  return Sample::make_2d(pts);
}

Sample read_sample_csv_file(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open sample file '" + path + "'");
  return read_sample_csv(in, header);
}

void write_sample_csv(std::ostream& out, const Sample& s, bool header) {
  if (header) out << (s.dim() == 1 ? "x\n" : "x,y\n");
  char buf[64];
  for (std::size_t i = 0; i < s.n(); ++i) {
    for (int d = 0; d < s.dim(); ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", s.coords()[i * s.dim() + d]);
      out << (d ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace logcave
