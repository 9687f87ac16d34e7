#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sane/errors.hpp"

namespace sane {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const noexcept { return height * width; }
  std::size_t size() const noexcept { return channels * height * width; }
  bool same_spatial(const Shape& o) const noexcept { return height == o.height && width == o.width; }
  friend bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return "[" + std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width) + "]";
  }
};

// Channel-major [C, H, W] array. Holds latents, encoded images and noise
// estimates alike.
template <typename T>
class BasicLatent {
 public:
  using value_type = T;

  BasicLatent() = default;

  explicit BasicLatent(Shape shape, T fill = T{}) : shape_(checked(shape)), data_(shape.size(), fill) {}

  BasicLatent(Shape shape, std::vector<T> data) : shape_(checked(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw StructuralError("latent data has " + std::to_string(data_.size()) + " values, shape " +
                            shape_.str() + " needs " + std::to_string(shape_.size()));
    }
  }

  static BasicLatent scalar(T v) { return BasicLatent(Shape{1, 1, 1}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[index(c, y, x)]; }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const { return data_[index(c, y, x)]; }

  bool all_finite() const noexcept {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const BasicLatent& a, const BasicLatent& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Shape checked(Shape s) {
    if (s.channels == 0 || s.height == 0 || s.width == 0) {
      throw ValidationError("latent dimensions must be >= 1, got " + s.str());
    }
    return s;
  }

  std::size_t index(std::size_t c, std::size_t y, std::size_t x) const {
    if (c >= shape_.channels || y >= shape_.height || x >= shape_.width) {
      throw ValidationError("latent index out of range");
    }
    return (c * shape_.height + y) * shape_.width + x;
  }

  Shape shape_{};
  std::vector<T> data_;
};

using Latent = BasicLatent<float>;

// One value per spatial location, row-major [H, W].
template <typename T>
struct SpatialMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> values;

  SpatialMap() = default;
  SpatialMap(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), values(h * w, fill) {}
  SpatialMap(std::size_t h, std::size_t w, std::vector<T> v) : height(h), width(w), values(std::move(v)) {
    if (values.size() != h * w) throw StructuralError("spatial map size does not match its dimensions");
  }

  T& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  const T& at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  friend bool operator==(const SpatialMap&, const SpatialMap&) = default;
};

// Per-location index of the specific instruction that governs it.
struct SelectionMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t candidates = 0;  // N: number of instructions the indices refer to
  std::vector<std::uint32_t> indices;

  SelectionMask() = default;
  SelectionMask(std::size_t h, std::size_t w, std::size_t n, std::vector<std::uint32_t> idx)
      : height(h), width(w), candidates(n), indices(std::move(idx)) {
    if (indices.size() != h * w) throw StructuralError("selection mask size does not match its dimensions");
    if (n == 0) throw ValidationError("selection mask needs at least one candidate");
    for (auto i : indices) {
      if (i >= n) throw ValidationError("selection mask index " + std::to_string(i) + " out of range");
    }
  }

  std::uint32_t at(std::size_t y, std::size_t x) const { return indices[y * width + x]; }

  // Number of locations assigned to each candidate.
  std::vector<std::size_t> histogram() const {
    std::vector<std::size_t> counts(candidates, 0);
    for (auto i : indices) ++counts[i];
    return counts;
  }

  friend bool operator==(const SelectionMask&, const SelectionMask&) = default;
};

}  // namespace sane
