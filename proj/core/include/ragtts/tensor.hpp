#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace ragtts {

// Dense row-major tensor of doubles, rank 1..3. Values must stay finite;
// validate() throws NumericError on NaN/Inf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape);
  Tensor(std::vector<size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  size_t rank() const { return shape_.size(); }
  const std::vector<size_t>& shape() const { return shape_; }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  double& at(size_t i) { return data_[check_index(i)]; }
  double at(size_t i) const { return data_[check_index(i)]; }
  double& at(size_t i, size_t j) { return data_[check_index(i, j)]; }
  double at(size_t i, size_t j) const { return data_[check_index(i, j)]; }
  double& at(size_t i, size_t j, size_t k) { return data_[check_index(i, j, k)]; }
  double at(size_t i, size_t j, size_t k) const { return data_[check_index(i, j, k)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void fill(double v);
  void validate(const std::string& what) const;  // throws NumericError on NaN/Inf

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  size_t check_index(size_t i) const;
  size_t check_index(size_t i, size_t j) const;
  size_t check_index(size_t i, size_t j, size_t k) const;

  std::vector<size_t> shape_;
  std::vector<double> data_;
};

// Ordered collection of named parameters with mirrored gradient buffers.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor init);  // throws ConfigError on duplicate

  bool has(const std::string& name) const { return by_name_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  size_t count() const { return names_.size(); }
  size_t total_entries() const;

  Tensor& value_at(size_t i) { return values_[i]; }
  const Tensor& value_at(size_t i) const { return values_[i]; }
  Tensor& grad_at(size_t i) { return grads_[i]; }
  const Tensor& grad_at(size_t i) const { return grads_[i]; }

  void zero_grads();

  bool operator==(const ParamSet& other) const {
    return names_ == other.names_ && values_ == other.values_;
  }

 private:
  size_t index_of(const std::string& name) const;  // throws NotFoundError

  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::map<std::string, size_t> by_name_;
};

}  // namespace ragtts
