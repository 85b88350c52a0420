#include "womble/car.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/OrderingMethods>

#include "womble/error.hpp"

namespace womble {

namespace {

int find_slot(const SparseMatrix& m, int row, int col) {
  const int* inner = m.innerIndexPtr();
  const int begin = m.outerIndexPtr()[col];
  const int end = m.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(inner + begin, inner + end, row);
  if (it == inner + end || *it != row) throw InternalError("precision pattern is missing an entry");
  return static_cast<int>(it - inner);
}

}  // namespace

void validate(const CarParams& params) {
  if (!(params.tau2 > 0.0) || !std::isfinite(params.tau2)) fail_validation("bad_tau2", "tau2 must be positive and finite");
  if (!(params.rho >= 0.0 && params.rho < 1.0)) fail_validation("bad_rho", "rho must lie in [0, 1)");
  if ((params.alpha.array() < 0.0).any()) fail_validation("negative_alpha", "alpha components must be non-negative");
}

PrecisionPattern::PrecisionPattern(const AreaGraph& graph)
    : n_(graph.size()), borders_(graph.borders()) {
  const int n = static_cast<int>(n_);

  SparseMatrix full(n, n);
  {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(n_ + 2 * borders_.size());
    for (int k = 0; k < n; ++k) t.emplace_back(k, k, 1.0);
    for (const auto& b : borders_) {
      t.emplace_back(static_cast<int>(b.k), static_cast<int>(b.j), -1.0);
      t.emplace_back(static_cast<int>(b.j), static_cast<int>(b.k), -1.0);
    }
    full.setFromTriplets(t.begin(), t.end());
    full.makeCompressed();
  }

  Eigen::AMDOrdering<int> amd;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
  amd(full, pinv);
  perm_.assign(pinv.indices().data(), pinv.indices().data() + n);
  if (perm_.size() != n_) {
    perm_.resize(n_);
    for (int k = 0; k < n; ++k) perm_[static_cast<std::size_t>(k)] = k;
  }
  inverse_.assign(n_, 0);
  for (int a = 0; a < n; ++a) inverse_[static_cast<std::size_t>(perm_[static_cast<std::size_t>(a)])] = a;

  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(n_ + borders_.size());
  for (int k = 0; k < n; ++k) t.emplace_back(inverse_[static_cast<std::size_t>(k)], inverse_[static_cast<std::size_t>(k)], 1.0);
  for (const auto& b : borders_) {
    const int a = inverse_[b.k];
    const int c = inverse_[b.j];
    t.emplace_back(std::max(a, c), std::min(a, c), -1.0);
  }
  permuted_lower_.resize(n, n);
  permuted_lower_.setFromTriplets(t.begin(), t.end());
  permuted_lower_.makeCompressed();

  diag_slot_.resize(n_);
  for (int k = 0; k < n; ++k) {
    const int a = inverse_[static_cast<std::size_t>(k)];
    diag_slot_[static_cast<std::size_t>(k)] = find_slot(permuted_lower_, a, a);
  }
  border_slot_.resize(borders_.size());
  for (std::size_t b = 0; b < borders_.size(); ++b) {
    const int a = inverse_[borders_[b].k];
    const int c = inverse_[borders_[b].j];
    border_slot_[b] = find_slot(permuted_lower_, std::max(a, c), std::min(a, c));
  }
}

PrecisionStructure::PrecisionStructure(const PrecisionPattern& pattern, const AdjacencyState& adj, double rho)
    : rho_(rho) {
  if (!(rho >= 0.0 && rho < 1.0)) fail_validation("bad_rho", "rho must lie in [0, 1)");
  if (adj.w.size() != pattern.borders_.size() || adj.row_sums.size() != pattern.n_)
    fail_validation("shape_mismatch", "adjacency state does not match the precision pattern");

  const std::size_t n = pattern.n_;
  SparseMatrix lower = pattern.permuted_lower_;
  double* values = lower.valuePtr();
  for (std::size_t k = 0; k < n; ++k)
    values[pattern.diag_slot_[k]] = rho * static_cast<double>(adj.row_sums[k]) + (1.0 - rho);
  for (std::size_t b = 0; b < adj.w.size(); ++b) values[pattern.border_slot_[b]] = adj.w[b] ? -rho : 0.0;

  {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(n + 2 * adj.w.size());
    for (std::size_t k = 0; k < n; ++k) {
      const int kk = static_cast<int>(k);
      t.emplace_back(kk, kk, rho * static_cast<double>(adj.row_sums[k]) + (1.0 - rho));
    }
    for (std::size_t b = 0; b < adj.w.size(); ++b) {
      if (!adj.w[b]) continue;
      const int k = static_cast<int>(pattern.borders_[b].k);
      const int j = static_cast<int>(pattern.borders_[b].j);
      t.emplace_back(k, j, -rho);
      t.emplace_back(j, k, -rho);
    }
    q_.resize(static_cast<int>(n), static_cast<int>(n));
    q_.setFromTriplets(t.begin(), t.end());
  }

  auto factor = std::make_shared<Factor>();
  factor->compute(lower);
  if (factor->info() != Eigen::Success)
    throw InternalError("precision matrix failed to factor; rho in [0,1) should guarantee positive definiteness");

  const auto diag = factor->matrixL().nestedExpression().diagonal();
  double ld = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) ld += std::log(diag(i));
  log_det_ = 2.0 * ld;
  factor_ = std::move(factor);
  perm_ = std::make_shared<const std::vector<int>>(pattern.perm_);
}

double PrecisionStructure::quad_form(const Eigen::VectorXd& x) const {
  if (x.size() != q_.rows()) fail_validation("shape_mismatch", "vector length does not match precision size");
  return x.dot(q_ * x);
}

Eigen::VectorXd PrecisionStructure::solve_transposed_factor(const Eigen::VectorXd& z) const {
  if (z.size() != q_.rows()) fail_validation("shape_mismatch", "vector length does not match precision size");
  const Eigen::VectorXd u = factor_->matrixU().solve(z);
  Eigen::VectorXd x(u.size());
  const auto& perm = *perm_;
  for (Eigen::Index a = 0; a < u.size(); ++a) x(perm[static_cast<std::size_t>(a)]) = u(a);
  return x;
}

PrecisionStructure build_precision(const AreaGraph& graph, const AdjacencyState& adj, double rho) {
  return PrecisionStructure(PrecisionPattern(graph), adj, rho);
}

double log_density_phi(const Eigen::VectorXd& phi, const CarParams& params, const PrecisionStructure& prec) {
  const auto n = static_cast<double>(phi.size());
  if (static_cast<std::size_t>(phi.size()) != prec.size())
    fail_validation("shape_mismatch", "phi length does not match precision size");
  const Eigen::VectorXd centred = phi.array() - params.mu;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * params.tau2) + 0.5 * prec.log_det() -
         prec.quad_form(centred) / (2.0 * params.tau2);
}

Conditional full_conditional_phi(std::size_t k, const Eigen::VectorXd& phi, const CarParams& params,
                                 const AreaGraph& graph, const AdjacencyState& adj) {
  if (k >= graph.size()) fail_validation("index_out_of_range", "area index out of range");
  double neighbour_sum = 0.0;
  double weight = 0.0;
  for (const auto& inc : graph.incident(k)) {
    if (!adj.w[inc.border]) continue;
    neighbour_sum += phi(static_cast<Eigen::Index>(inc.neighbour));
    weight += 1.0;
  }
  const double denom = params.rho * weight + 1.0 - params.rho;
  return {(params.rho * neighbour_sum + (1.0 - params.rho) * params.mu) / denom, params.tau2 / denom};
}

Eigen::VectorXd sample_car(const PrecisionStructure& prec, double mu, double tau2, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(static_cast<Eigen::Index>(prec.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return (std::sqrt(tau2) * prec.solve_transposed_factor(z)).array() + mu;
}

}  // namespace womble
