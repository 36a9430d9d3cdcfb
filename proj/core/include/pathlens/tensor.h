// Copyright 2026 The pathlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PATHLENS_TENSOR_H_
#define PATHLENS_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pathlens {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t spatial() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t size() const { return spatial() * static_cast<std::size_t>(channels); }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string ToString(const Shape& shape);

// Dense channel-major (C x H x W) tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }

  // The flattened spatial activations of one feature map.
  std::span<double> channel(int c) {
    return std::span<double>(data_).subspan(c * shape_.spatial(), shape_.spatial());
  }
  std::span<const double> channel(int c) const {
    return std::span<const double>(data_).subspan(c * shape_.spatial(), shape_.spatial());
  }

  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double Dot(std::span<const double> a, std::span<const double> b);
double Sum(std::span<const double> a);

}  // namespace pathlens

#endif  // PATHLENS_TENSOR_H_
