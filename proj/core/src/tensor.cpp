#include "ragtts/tensor.hpp"

#include <cmath>

#include "ragtts/errors.hpp"

namespace ragtts {

namespace {

size_t shape_product(const std::vector<size_t>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw ShapeError("tensor rank must be 1..3, got " + std::to_string(shape.size()));
  }
  size_t n = 1;
  for (size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor data length does not match shape");
  }
  validate("tensor");
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

void Tensor::validate(const std::string& what) const {
  for (double x : data_) {
    if (!std::isfinite(x)) {
      throw NumericError(what + " contains a non-finite value");
    }
  }
}

size_t Tensor::check_index(size_t i) const {
  if (rank() != 1 || i >= shape_[0]) throw ShapeError("bad rank-1 index");
  return i;
}

size_t Tensor::check_index(size_t i, size_t j) const {
  if (rank() != 2 || i >= shape_[0] || j >= shape_[1]) throw ShapeError("bad rank-2 index");
  return i * shape_[1] + j;
}

size_t Tensor::check_index(size_t i, size_t j, size_t k) const {
  if (rank() != 3 || i >= shape_[0] || j >= shape_[1] || k >= shape_[2]) {
    throw ShapeError("bad rank-3 index");
  }
  return (i * shape_[1] + j) * shape_[2] + k;
}

Tensor& ParamSet::add(const std::string& name, Tensor init) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  by_name_[name] = names_.size();
  names_.push_back(name);
  grads_.push_back(Tensor::zeros(init.shape()));
  values_.push_back(std::move(init));
  return values_.back();
}

size_t ParamSet::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw NotFoundError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamSet::value(const std::string& name) { return values_[index_of(name)]; }
const Tensor& ParamSet::value(const std::string& name) const { return values_[index_of(name)]; }
Tensor& ParamSet::grad(const std::string& name) { return grads_[index_of(name)]; }
const Tensor& ParamSet::grad(const std::string& name) const { return grads_[index_of(name)]; }

size_t ParamSet::total_entries() const {
  size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

void ParamSet::zero_grads() {
  for (Tensor& g : grads_) g.fill(0.0);
}

}  // namespace ragtts
