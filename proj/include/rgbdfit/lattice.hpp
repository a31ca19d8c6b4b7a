#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rgbdfit/error.hpp"

namespace rgbdfit {

// Row-major W x H grid. Pixel (x, y) is column x, row y.
template <typename T>
class Lattice {
 public:
  Lattice() = default;
  Lattice(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DimensionMismatch("negative lattice dimensions");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T& at(int x, int y) {
    check(x, y);
    return (*this)(x, y);
  }
  const T& at(int x, int y) const {
    check(x, y);
    return (*this)(x, y);
  }

  std::span<T> row(int y) { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int y) const {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool same_shape(int w, int h) const { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Lattice<U>& other) const {
    return other.width() == width_ && other.height() == height_;
  }

  bool operator==(const Lattice&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  void check(int x, int y) const {
    if (!contains(x, y)) {
      throw BoundsError("pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                        ") outside " + std::to_string(width_) + "x" + std::to_string(height_) +
                        " lattice");
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <typename T, typename U>
void require_same_shape(const Lattice<T>& a, const Lattice<U>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width()) + "x" +
                            std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                            std::to_string(b.height()));
  }
}

}  // namespace rgbdfit
