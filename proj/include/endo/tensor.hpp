#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace endo {

// Raised when operand shapes are incompatible; the message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. Images and feature maps use HxWxC.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 (HxWxC) element access.
  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * shape_[1] + x) * shape_[2] + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * shape_[1] + x) * shape_[2] + c];
  }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Trainable parameter with its gradient and momentum buffer.
struct ParamBlock {
  std::string name;
  Tensor value;
  Tensor gradient;
  Tensor momentum;
  bool weight_decay = true;  // false for blocks that carry their own penalty

  ParamBlock() = default;
  ParamBlock(std::string block_name, Shape shape);

  void zero_grad() { gradient.fill(0.0); }
};

// Ordered collection of named parameter blocks, addressed by index so that
// models holding a store stay copyable values.
class ParamStore {
 public:
  std::size_t add(std::string name, Shape shape);

  ParamBlock& operator[](std::size_t i) { return blocks_[i]; }
  const ParamBlock& operator[](std::size_t i) const { return blocks_[i]; }
  std::size_t size() const { return blocks_.size(); }

  ParamBlock* find(const std::string& name);
  const ParamBlock* find(const std::string& name) const;

  std::vector<ParamBlock>& blocks() { return blocks_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::vector<ParamBlock> blocks_;
};

}  // namespace endo
