#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hmgdyn::nn {

// (batch, channels, height, width). Convolution kernels reuse it as
// (out_channels, in_channels, k, k).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x;
  }
  T& at(int n, int c, int y, int x) { return data[offset(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const { return data[offset(n, c, y, x)]; }

  T* plane(int n, int c) { return data.data() + offset(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data.data() + offset(n, c, 0, 0); }
};

}  // namespace hmgdyn::nn
