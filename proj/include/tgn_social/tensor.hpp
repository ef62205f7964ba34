#pragma once

// Dense rank-2 tensors and ordered named parameter sets.
//
// Vectors are represented as 1 x n rows. Scalars are 1 x 1. The element type
// is double unless TGN_SOCIAL_REAL names another floating type; the gradient
// check build uses long double.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#ifndef TGN_SOCIAL_REAL
#define TGN_SOCIAL_REAL double
#endif

namespace tgn_social {

using Real = TGN_SOCIAL_REAL;

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, Real fill = 0.0)
      : shape_{rows, cols}, data_(rows * cols, fill) {
    check_dims();
  }

  Tensor(std::size_t rows, std::size_t cols, std::vector<Real> data)
      : shape_{rows, cols}, data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_.size()) {
      throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_.str());
    }
  }

  static Tensor row(std::vector<Real> values) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values));
  }

  template <typename T>
    requires(std::is_arithmetic_v<T> && !std::is_same_v<T, Real>)
  static Tensor row(const std::vector<T>& values) {
    return row(std::vector<Real>(values.begin(), values.end()));
  }

  static Tensor scalar(Real v) { return Tensor(1, 1, v); }

  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  const std::vector<Real>& values() const { return data_; }
  std::vector<double> doubles() const { return {data_.begin(), data_.end()}; }

  std::span<const Real> row_span(std::size_t r) const {
    return std::span<const Real>(data_).subspan(r * shape_.cols, shape_.cols);
  }

  Real item() const {
    if (data_.size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_.str());
    return data_[0];
  }

  bool all_finite() const {
    for (Real v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& other) {
    if (other.shape_ != shape_) {
      throw std::invalid_argument("shape mismatch in += : " + shape_.str() + " vs " + other.shape_.str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check_dims() const {
    if (shape_.rows == 0 || shape_.cols == 0) {
      throw std::invalid_argument("tensor dimensions must be positive, got " + shape_.str());
    }
  }

  Shape shape_;
  std::vector<Real> data_;
};

/// Named tensors with unique names, iterated in insertion order.
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  Tensor& add(std::string name, Tensor value) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(value));
    return entries_.back().second;
  }

  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  Tensor& at(std::string_view name) { return entries_[position(name)].second; }
  const Tensor& at(std::string_view name) const { return entries_[position(name)].second; }

  const Tensor* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }
  Tensor* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Same names and shapes, all zeros. With a predicate, keeps only matching names.
  template <typename Pred>
  ParamSet zeros_like(Pred keep) const {
    ParamSet out;
    for (const auto& [name, t] : entries_) {
      if (keep(std::string_view(name))) out.add(name, Tensor(t.rows(), t.cols()));
    }
    return out;
  }
  ParamSet zeros_like() const {
    return zeros_like([](std::string_view) { return true; });
  }

  void set_zero() {
    for (auto& [_, t] : entries_) t.fill(0.0);
  }

  bool operator==(const ParamSet& other) const { return entries_ == other.entries_; }

 private:
  std::size_t position(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// nlohmann/json prints doubles with the shortest representation that
// round-trips, so to_json/from_json is bit-exact for finite values.
inline nlohmann::ordered_json to_json(const ParamSet& params) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [name, t] : params) {
    nlohmann::ordered_json entry;
    entry["shape"] = {t.rows(), t.cols()};
    entry["data"] = t.values();
    doc[name] = std::move(entry);
  }
  return doc;
}

inline ParamSet param_set_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("parameter document must be a JSON object");
  ParamSet out;
  for (const auto& [name, entry] : doc.items()) {
    const auto& shape = entry.at("shape");
    if (!shape.is_array() || shape.size() != 2) {
      throw std::invalid_argument("parameter '" + name + "': shape must be [rows, cols]");
    }
    out.add(name, Tensor(shape[0].get<std::size_t>(), shape[1].get<std::size_t>(),
                         entry.at("data").get<std::vector<Real>>()));
  }
  return out;
}

}  // namespace tgn_social
