// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/matrix.hpp"

#include <algorithm>

#include "pwemoe/error.hpp"

namespace pwemoe {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw ShapeError("matrix data size does not match shape");
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = row(indices[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

}  // namespace pwemoe
