#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised when an input violates a documented precondition or invariant.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a file cannot be parsed; the message carries the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major 2D buffer. Element (x, y) lives at index y * width + x.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw PreconditionError("grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

/// Worker count taken from LIGHTFIT_THREADS, else the hardware concurrency.
int thread_count();

/// Runs body(begin, end) over [0, n) split into contiguous chunks. Every index
/// is visited exactly once; chunk boundaries depend only on n and the thread
/// count, so per-index writes are scheduling independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Reduces term(x, y) over a width x height raster. Each row is accumulated
/// left to right and row partials are combined in row order, so the result
/// is bit-identical for every thread count.
template <typename Acc, typename Term>
Acc row_ordered_reduce(int width, int height, const Acc& zero, Term&& term) {
  std::vector<Acc> rows(static_cast<std::size_t>(std::max(height, 0)), zero);
  parallel_for(rows.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t y = begin; y < end; ++y) {
      Acc acc = zero;
      for (int x = 0; x < width; ++x) {
        acc += term(x, static_cast<int>(y));
      }
      rows[y] = acc;
    }
  });
  Acc total = zero;
  for (const Acc& r : rows) {
    total += r;
  }
  return total;
}

}  // namespace lightfit
