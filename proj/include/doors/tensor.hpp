#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace doors {

// Dense row-major tensor. The last dimension is the contiguous "column" axis;
// all 2-D kernel calls view a tensor as [numel/cols, cols].
template <typename T>
struct Tensor {
  std::vector<int> dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
    data.assign(static_cast<size_t>(numel_of(dims)), T(0));
  }
  Tensor(std::vector<int> d, std::vector<T> v) : dims(std::move(d)), data(std::move(v)) {
    if (static_cast<int64_t>(data.size()) != numel_of(dims))
      throw std::invalid_argument("tensor data/shape mismatch");
  }

  static int64_t numel_of(const std::vector<int>& d) {
    int64_t n = 1;
    for (int x : d) n *= x;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int cols() const { return dims.empty() ? 1 : dims.back(); }
  int64_t rows() const { return cols() == 0 ? 0 : numel() / cols(); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T* row_ptr(int64_t r) { return data.data() + r * cols(); }
  const T* row_ptr(int64_t r) const { return data.data() + r * cols(); }

  void zero() { std::fill(data.begin(), data.end(), T(0)); }

  bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

}  // namespace doors
