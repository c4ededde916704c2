#pragma once

// Fisher linear discriminant analysis: scatter matrices, the whitened
// symmetric eigenproblem, and projection.
//
// The within-class scatter is regularized as S_w + eps*I before inversion;
// the solution path whitens by its Cholesky factor and then solves a
// symmetric eigenproblem, so eigenvalues are real by construction and the
// projection satisfies A^T (S_w + eps I) A = I.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenestats/serialize.hpp"

namespace scenestats {

struct ScatterPair {
  Eigen::MatrixXd between;  // S_b: sum_c N_c (mu_c - mu)(mu_c - mu)^T
  Eigen::MatrixXd within;   // S_w: sum_c sum_j (w_cj - mu_c)(w_cj - mu_c)^T
  Eigen::VectorXd global_mean;
  std::vector<std::string> class_labels;  // sorted
  std::vector<Eigen::VectorXd> class_means;
  std::vector<std::size_t> class_counts;
  std::size_t total_count = 0;

  std::size_t num_classes() const { return class_labels.size(); }
  Eigen::Index dim() const { return within.rows(); }
};

/// Unnormalized between/within scatter of labeled row vectors. Requires at
/// least two classes; class order is lexicographic.
inline ScatterPair compute_scatter(const Eigen::MatrixXd& rows,
                                   const std::vector<std::string>& labels) {
  const auto n = rows.rows();
  const auto d = rows.cols();
  if (static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("scatter: row/label count mismatch");
  if (n == 0) throw std::invalid_argument("scatter: no data");

  std::map<std::string, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  if (by_class.size() < 2)
    throw std::invalid_argument("scatter: need at least two classes, got " +
                                std::to_string(by_class.size()));

  ScatterPair sp;
  sp.total_count = static_cast<std::size_t>(n);
  sp.global_mean = rows.colwise().mean();
  sp.between = Eigen::MatrixXd::Zero(d, d);
  sp.within = Eigen::MatrixXd::Zero(d, d);

  for (const auto& [label, idx] : by_class) {
    Eigen::MatrixXd sub(idx.size(), d);
    for (std::size_t j = 0; j < idx.size(); ++j) sub.row(static_cast<Eigen::Index>(j)) = rows.row(idx[j]);
    const Eigen::VectorXd mu_c = sub.colwise().mean();
    sub.rowwise() -= mu_c.transpose();
    sp.within.selfadjointView<Eigen::Lower>().rankUpdate(sub.transpose(), 1.0);
    const Eigen::VectorXd delta = mu_c - sp.global_mean;
    sp.between.selfadjointView<Eigen::Lower>().rankUpdate(delta, static_cast<double>(idx.size()));
    sp.class_labels.push_back(label);
    sp.class_means.push_back(mu_c);
    sp.class_counts.push_back(idx.size());
  }
  sp.within = sp.within.selfadjointView<Eigen::Lower>();
  sp.between = sp.between.selfadjointView<Eigen::Lower>();
  return sp;
}

struct LdaModel {
  Eigen::MatrixXd projection;  // d x p, columns are retained eigenvectors
  Eigen::VectorXd eigenvalues;  // descending, length p
  std::vector<std::string> class_labels;
  double regularization_eps = 0.0;
  std::uint64_t layout_hash = 0;

  Eigen::Index input_dim() const { return projection.rows(); }
  Eigen::Index output_dim() const { return projection.cols(); }

  Eigen::VectorXd project(const Eigen::VectorXd& w) const {
    if (w.size() != projection.rows())
      throw std::invalid_argument("lda: vector dimension " + std::to_string(w.size()) +
                                  " does not match model dimension " +
                                  std::to_string(projection.rows()));
    return projection.transpose() * w;
  }

  std::vector<double> project(std::span<const double> w) const {
    Eigen::Map<const Eigen::VectorXd> v(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::VectorXd out = project(Eigen::VectorXd(v));
    return {out.data(), out.data() + out.size()};
  }

  void save(std::ostream& os) const {
    io::BinaryWriter w(os);
    w.magic("SSLD");
    w.u32(1);
    w.u64(layout_hash);
    w.f64(regularization_eps);
    w.u32(static_cast<std::uint32_t>(class_labels.size()));
    for (const auto& s : class_labels) w.str(s);
    w.u64(static_cast<std::uint64_t>(projection.rows()));
    w.u64(static_cast<std::uint64_t>(projection.cols()));
    w.f64_span({eigenvalues.data(), static_cast<std::size_t>(eigenvalues.size())});
    w.f64_span({projection.data(), static_cast<std::size_t>(projection.size())});
  }

  static LdaModel load(std::istream& is) {
    io::BinaryReader r(is);
    r.expect_magic("SSLD");
    if (const auto ver = r.u32(); ver != 1)
      throw std::runtime_error("lda: unsupported model version " + std::to_string(ver));
    LdaModel m;
    m.layout_hash = r.u64();
    m.regularization_eps = r.f64();
    const auto n_classes = r.u32();
    m.class_labels.resize(n_classes);
    for (auto& s : m.class_labels) s = r.str();
    const auto rows = static_cast<Eigen::Index>(r.u64());
    const auto cols = static_cast<Eigen::Index>(r.u64());
    const auto eig = r.f64_vec();
    const auto proj = r.f64_vec();
    if (static_cast<Eigen::Index>(eig.size()) != cols ||
        static_cast<Eigen::Index>(proj.size()) != rows * cols)
      throw std::runtime_error("lda: corrupt model record");
    m.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eig.data(), cols);
    m.projection = Eigen::Map<const Eigen::MatrixXd>(proj.data(), rows, cols);
    return m;
  }
};

/// Default regularization: eps = 1e-3 * trace(S_w) / d.
inline double default_regularization(const ScatterPair& scatter, double scale = 1e-3) {
  return scale * scatter.within.trace() / static_cast<double>(scatter.dim());
}

/// Solves for the top-p discriminant directions of (S_w + eps I)^{-1} S_b
/// via Cholesky whitening and a symmetric eigenproblem. Column signs follow
/// a fixed convention (largest-magnitude entry positive) so refits are
/// reproducible.
inline LdaModel fit_lda(const ScatterPair& scatter, int p,
                        std::optional<double> eps_override = std::nullopt) {
  const auto d = scatter.dim();
  const auto c = static_cast<int>(scatter.num_classes());
  if (c < 2) throw std::invalid_argument("lda: need at least two classes");
  if (p < 1) throw std::invalid_argument("lda: output dimension must be positive");
  if (p > c - 1)
    throw std::invalid_argument("lda: output dimension " + std::to_string(p) +
                                " exceeds class count - 1 (" + std::to_string(c - 1) + ")");
  if (p > d) throw std::invalid_argument("lda: output dimension exceeds input dimension");

  const double eps = eps_override.value_or(default_regularization(scatter));
  Eigen::MatrixXd within_reg = scatter.within;
  within_reg.diagonal().array() += eps;

  const Eigen::LLT<Eigen::MatrixXd> llt(within_reg);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("lda: regularized within-class scatter is not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();

  // M = L^{-1} S_b L^{-T}, kept symmetric explicitly.
  Eigen::MatrixXd m = lower.triangularView<Eigen::Lower>().solve(scatter.between);
  m = lower.triangularView<Eigen::Lower>().solve(m.transpose().eval());
  m = (0.5 * (m + m.transpose())).eval();

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("lda: eigensolver failed");

  LdaModel model;
  model.class_labels = scatter.class_labels;
  model.regularization_eps = eps;
  model.eigenvalues.resize(p);
  Eigen::MatrixXd u(d, p);
  for (int j = 0; j < p; ++j) {
    const auto src = d - 1 - j;  // Eigen orders ascending
    model.eigenvalues[j] = std::max(0.0, es.eigenvalues()[src]);
    u.col(j) = es.eigenvectors().col(src);
  }
  // Back-substitute the whitening: A = L^{-T} U.
  model.projection = lower.transpose().triangularView<Eigen::Upper>().solve(u);

  for (int j = 0; j < p; ++j) {
    Eigen::Index imax = 0;
    model.projection.col(j).cwiseAbs().maxCoeff(&imax);
    if (model.projection(imax, j) < 0.0) model.projection.col(j) = -model.projection.col(j);
  }
  return model;
}

}  // namespace scenestats
