#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "logcave/geometry.hpp"

namespace logcave {

// Observations X_1, ..., X_n in R^dim, dim in {1, 2}, stored row-major.
class Sample {
 public:
  Sample() = default;
  static Sample make_1d(std::vector<double> xs);
  static Sample make_2d(const std::vector<Point2>& points);

  int dim() const { return dim_; }
  std::size_t n() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  const std::vector<double>& coords() const { return coords_; }

  double x(std::size_t i) const { return coords_[i * dim_]; }
  Point2 point(std::size_t i) const {
    return dim_ == 1 ? Point2{coords_[i], 0.0} : Point2{coords_[2 * i], coords_[2 * i + 1]};
  }
  std::vector<Point2> points_2d() const;

  // Same observations under x -> scale * x + shift (shift[1] ignored in 1D).
  Sample affine(double scale, const Point2& shift) const;

 private:
  int dim_ = 0;
  std::vector<double> coords_;
};

// One point per row, dim comma-separated columns. A header row is skipped when
// `header` is set. Malformed rows raise INVALID_INPUT naming the row number
// (1-based, counting the header).
Sample read_sample_csv(std::istream& in, bool header);
Sample read_sample_csv_file(const std::string& path, bool header);
void write_sample_csv(std::ostream& out, const Sample& s, bool header);

}  // namespace logcave
