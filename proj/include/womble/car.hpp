#pragma once

// Leroux CAR prior: phi ~ N(mu 1, tau2 [rho W* + (1 - rho) I]^{-1}).

#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "womble/graph.hpp"
#include "womble/rng.hpp"

namespace womble {

struct CarParams {
  double mu = 0.0;
  double tau2 = 1.0;
  double rho = 0.99;
  Eigen::VectorXd alpha;
};

void validate(const CarParams& params);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Sparsity pattern of Q for one graph plus a fill-reducing ordering computed
/// once. The pattern holds every border regardless of w, so only values
/// change between builds. Immutable and shareable across chains.
class PrecisionPattern {
 public:
  explicit PrecisionPattern(const AreaGraph& graph);

  std::size_t size() const noexcept { return n_; }
  /// perm[a] = original index placed at position a of the factored matrix.
  const std::vector<int>& permutation() const noexcept { return perm_; }

 private:
  friend class PrecisionStructure;

  std::size_t n_;
  std::vector<Border> borders_;
  std::vector<int> perm_;
  std::vector<int> inverse_;
  // Structure of the permuted lower triangle; values slot per diagonal and per border.
  SparseMatrix permuted_lower_;
  std::vector<int> diag_slot_;
  std::vector<int> border_slot_;
};

/// Q = rho W* + (1 - rho) I with its factorization and log-determinant.
class PrecisionStructure {
 public:
  PrecisionStructure(const PrecisionPattern& pattern, const AdjacencyState& adj, double rho);

  const SparseMatrix& matrix() const noexcept { return q_; }
  double log_det() const noexcept { return log_det_; }
  double rho() const noexcept { return rho_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(q_.rows()); }

  double quad_form(const Eigen::VectorXd& x) const;

  /// Draw x ~ N(0, Q^{-1}) from standard normals via the cached factor.
  Eigen::VectorXd solve_transposed_factor(const Eigen::VectorXd& z) const;

 private:
  using Factor = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

  double rho_;
  SparseMatrix q_;
  double log_det_ = 0.0;
  std::shared_ptr<const Factor> factor_;
  std::shared_ptr<const std::vector<int>> perm_;
};

/// Convenience wrapper: builds a one-off pattern. Prefer reusing a
/// PrecisionPattern inside loops.
PrecisionStructure build_precision(const AreaGraph& graph, const AdjacencyState& adj, double rho);

/// Full joint log-density, normalizing constant included.
double log_density_phi(const Eigen::VectorXd& phi, const CarParams& params, const PrecisionStructure& prec);

struct Conditional {
  double mean = 0.0;
  double variance = 0.0;
};

/// Univariate full conditional of phi_k given the rest.
Conditional full_conditional_phi(std::size_t k, const Eigen::VectorXd& phi, const CarParams& params,
                                 const AreaGraph& graph, const AdjacencyState& adj);

/// One exact draw from the CAR prior.
Eigen::VectorXd sample_car(const PrecisionStructure& prec, double mu, double tau2, Rng& rng);

}  // namespace womble
