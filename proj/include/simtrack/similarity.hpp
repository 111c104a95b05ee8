// Copyright 2026 The simtrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Appearance similarity between current detections and matching candidates.
//
// Embedding lists are passed as dense matrices with one embedding per row, so
// any Eigen expression (blocks, maps, products) can be handed in directly.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace simtrack {

using Embedding = Eigen::VectorXd;
using EmbeddingList = Eigen::MatrixXd;  // rows are embeddings
using AdmissibleMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Entry (i, j) is the cosine between row i of `dets` and row j of `cands`.
template <typename DerivedA, typename DerivedB>
DenseMatrix<typename DerivedA::Scalar> cosine_matrix(const Eigen::MatrixBase<DerivedA>& dets,
                                                     const Eigen::MatrixBase<DerivedB>& cands) {
  using Scalar = typename DerivedA::Scalar;
  if (dets.cols() != cands.cols()) {
    throw std::invalid_argument("cosine_matrix: embedding dimensions differ (" +
                                std::to_string(dets.cols()) + " vs " +
                                std::to_string(cands.cols()) + ")");
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dn = dets.rowwise().norm();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> cn = cands.rowwise().norm();
  for (Eigen::Index i = 0; i < dn.size(); ++i) {
    if (!(dn(i) > Scalar(0)))
      throw std::invalid_argument("cosine_matrix: detection embedding " + std::to_string(i) +
                                  " has zero norm");
  }
  for (Eigen::Index j = 0; j < cn.size(); ++j) {
    if (!(cn(j) > Scalar(0)))
      throw std::invalid_argument("cosine_matrix: candidate embedding " + std::to_string(j) +
                                  " has zero norm");
  }
  DenseMatrix<Scalar> out = dets * cands.transpose();
  out.array().colwise() /= dn.array();
  out.array().rowwise() /= cn.transpose().array();
  return out.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
}

/// Both halves of the bi-directional softmax and their average.
template <typename Scalar>
struct BiSoftmax {
  DenseMatrix<Scalar> row;    // softmax over candidates, rows sum to 1
  DenseMatrix<Scalar> col;    // softmax over detections, columns sum to 1
  DenseMatrix<Scalar> score;  // 0.5 * (row + col)
};

/// Bi-directional softmax from a precomputed logit matrix. Inadmissible
/// entries act as -inf logits: they receive probability 0 and are excluded
/// from the normalizers. A row or column with no admissible entry is all 0.
template <typename Derived>
BiSoftmax<typename Derived::Scalar> bisoftmax_from_logits(
    const Eigen::MatrixBase<Derived>& logits, const AdmissibleMask* admissible = nullptr) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = logits.rows();
  const Eigen::Index m = logits.cols();
  const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();

  DenseMatrix<Scalar> masked = logits;
  if (admissible != nullptr) {
    if (admissible->rows() != n || admissible->cols() != m)
      throw std::invalid_argument("bisoftmax: mask shape does not match logits");
    masked = admissible->select(masked, DenseMatrix<Scalar>::Constant(n, m, neg_inf));
  }

  BiSoftmax<Scalar> out{DenseMatrix<Scalar>::Zero(n, m), DenseMatrix<Scalar>::Zero(n, m),
                        DenseMatrix<Scalar>::Zero(n, m)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar peak = masked.row(i).maxCoeff();
    if (peak == neg_inf) continue;
    auto e = (masked.row(i).array() - peak).exp();
    out.row.row(i) = e / e.sum();
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const Scalar peak = masked.col(j).maxCoeff();
    if (peak == neg_inf) continue;
    auto e = (masked.col(j).array() - peak).exp();
    out.col.col(j) = e / e.sum();
  }
  out.score = Scalar(0.5) * (out.row + out.col);
  return out;
}

/// f(i, j) = 0.5 * [softmax_j(n_i . m_j) + softmax_i(n_i . m_j)] on raw
/// (unnormalized) embeddings.
template <typename DerivedA, typename DerivedB>
DenseMatrix<typename DerivedA::Scalar> bisoftmax_matrix(const Eigen::MatrixBase<DerivedA>& dets,
                                                        const Eigen::MatrixBase<DerivedB>& cands) {
  if (dets.rows() == 0 || cands.rows() == 0)
    throw std::invalid_argument("bisoftmax_matrix: empty detection or candidate list");
  if (dets.cols() != cands.cols())
    throw std::invalid_argument("bisoftmax_matrix: embedding dimensions differ");
  const DenseMatrix<typename DerivedA::Scalar> logits = dets * cands.transpose();
  return bisoftmax_from_logits(logits).score;
}

}  // namespace simtrack
