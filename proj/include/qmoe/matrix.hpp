#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qmoe/error.hpp"

namespace qmoe {

/// Dense row-major table of features; one row per sample.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw ConfigError("FeatureMatrix: value count does not match shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  const std::vector<double>& values() const { return values_; }

  void append_row(std::span<const double> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) throw ConfigError("FeatureMatrix: row width mismatch");
    values_.insert(values_.end(), r.begin(), r.end());
    ++rows_;
  }

  FeatureMatrix select_rows(std::span<const std::size_t> indices) const {
    FeatureMatrix out(0, cols_);
    out.values_.reserve(indices.size() * cols_);
    for (std::size_t i : indices) {
      const auto r = row(i);
      out.values_.insert(out.values_.end(), r.begin(), r.end());
    }
    out.rows_ = indices.size();
    return out;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

}  // namespace qmoe
