#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace heurplan {

struct Shape4 {
  int n = 0;  // batch
  int c = 0;  // channels
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rank-4 NCHW array of doubles with an optional gradient buffer of the same shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) throw ShapeError("negative tensor dimension");
  }
  Tensor(Shape4 shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.numel()) throw ShapeError("tensor data length does not match " + to_string(shape_));
  }

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  /// Contiguous (h x w) plane of item n, channel c.
  double* plane(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  const double* plane(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }

  bool has_grad() const { return !grad_.empty(); }
  std::vector<double>& grad() {
    if (grad_.empty()) grad_.assign(data_.size(), 0.0);
    return grad_;
  }
  const std::vector<double>& grad() const { return grad_; }
  void zero_grad() { grad_.assign(data_.size(), 0.0); }
  void drop_grad() { grad_.clear(); }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape4 shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

}  // namespace heurplan
