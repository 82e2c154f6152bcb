// Copyright 2026 The CAWS Planner Authors
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

// Sparse nonlinear programming by an augmented Lagrangian method.
//
//   min f(x)  s.t.  c(x) = 0,  g(x) <= 0,  lo <= x <= hi
//
// The objective and constraints are sums of small dense blocks, each acting
// on a handful of variables and differentiated exactly to second order with
// Jet2. Bounds are handled directly by a projected Newton inner solver; the
// general constraints enter a Powell-Hestenes-Rockafellar penalty.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>
#include "caws/jet.hpp"

namespace caws {

enum class BlockKind { kObjective, kEquality, kInequality };

/// A group of scalar functions of a few variables, all of one kind.
class NlpBlock {
 public:
  virtual ~NlpBlock() = default;

  BlockKind kind = BlockKind::kObjective;
  std::vector<int> vars;
  int outputs = 1;
  int family = 0;  // caller-defined tag for reporting

  virtual void values(const double* x, double* out) const = 0;
  /// Values, gradients (outputs x vars) and per-output Hessians.
  virtual void derivatives(const double* x, double* out, Eigen::MatrixXd& jac,
                           std::vector<Eigen::MatrixXd>& hess) const = 0;
};

/// Block from a functor with `template <class T> void operator()(const T* x,
/// T* out) const`, differentiated with Jet2<N>.
template <int N, class F>
class JetBlock : public NlpBlock {
 public:
  JetBlock(BlockKind k, std::vector<int> v, int n_out, F f, int fam = 0) : f_(std::move(f)) {
    kind = k;
    vars = std::move(v);
    outputs = n_out;
    family = fam;
  }

  void values(const double* x, double* out) const override { f_(x, out); }

  void derivatives(const double* x, double* out, Eigen::MatrixXd& jac,
                   std::vector<Eigen::MatrixXd>& hess) const override {
    Jet2<N> in[N];
    const int n = static_cast<int>(vars.size());
    for (int i = 0; i < n; ++i) in[i] = Jet2<N>::variable(x[i], i);
    std::vector<Jet2<N>> res(outputs);
    f_(in, res.data());
    jac.resize(outputs, n);
    hess.resize(outputs);
    for (int o = 0; o < outputs; ++o) {
      out[o] = res[o].v;
      jac.row(o) = res[o].g.head(n).transpose();
      hess[o] = res[o].h.topLeftCorner(n, n);
    }
  }

 private:
  F f_;
};

template <int N, class F>
std::unique_ptr<NlpBlock> make_block(BlockKind kind, std::vector<int> vars, int outputs, F f,
                                     int family = 0) {
  return std::make_unique<JetBlock<N, F>>(kind, std::move(vars), outputs, std::move(f), family);
}

struct NlpProblem {
  int n = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::unique_ptr<NlpBlock>> blocks;
};

struct NlpOptions {
  int max_iterations = 500;  // total inner Newton iterations
  double feas_tol = 1e-6;
  double opt_tol = 1e-6;
  double initial_penalty = 10.0;
  double max_penalty = 1e12;
};

enum class NlpStatus { kConverged, kMaxIterations };

struct NlpResult {
  NlpStatus status = NlpStatus::kMaxIterations;
  std::vector<double> x;
  int iterations = 0;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  bool stalled = false;  // no progress possible at the maximum penalty
};

class AugmentedLagrangian {
 public:
  /// `extra_violation`, when set, adds a caller-defined feasibility measure
  /// (for example residuals in reporting units) to the internal one.
  AugmentedLagrangian(const NlpProblem& problem, NlpOptions options,
                      std::function<double(const std::vector<double>&)> extra_violation = {})
      : p_(problem), opt_(options), extra_(std::move(extra_violation)) {
    for (const auto& b : p_.blocks) {
      offsets_.push_back(n_mult_);
      if (b->kind != BlockKind::kObjective) n_mult_ += b->outputs;
    }
  }

  NlpResult solve(std::vector<double> x) {
    for (int i = 0; i < p_.n; ++i) x[i] = std::clamp(x[i], p_.lower[i], p_.upper[i]);
    mult_.assign(n_mult_, 0.0);
    rho_ = opt_.initial_penalty;
    stall_count_ = 0;
    NlpResult result;
    double inner_tol = 1e-2;
    double prev_violation = violation(x);
    int iterations = 0;
    int outer = 0;
    while (true) {
      iterations += inner_solve(x, inner_tol, opt_.max_iterations - iterations);
      update_multipliers(x);
      const double viol = violation(x);
      const double stat = stationarity(x);
      result.x = x;
      result.iterations = iterations;
      result.objective = objective(x);
      result.max_violation = viol;
      result.stationarity = stat;
      if (viol <= opt_.feas_tol && stat <= opt_.opt_tol) {
        result.status = NlpStatus::kConverged;
        return result;
      }
      if (iterations >= opt_.max_iterations || ++outer > 200) {
        result.status = NlpStatus::kMaxIterations;
        return result;
      }
      stall_count_ = rho_ >= opt_.max_penalty && viol > 0.9 * prev_violation ? stall_count_ + 1 : 0;
      if (stall_count_ >= 5) {
        result.status = NlpStatus::kMaxIterations;
        result.stalled = true;
        return result;
      }
      if (viol > 0.25 * prev_violation && viol > opt_.feas_tol) {
        rho_ = std::min(rho_ * 10.0, opt_.max_penalty);
      }
      prev_violation = viol;
      inner_tol = std::max(0.1 * inner_tol, 0.1 * opt_.opt_tol);
    }
  }

  double objective(const std::vector<double>& x) const {
    double f = 0.0;
    std::vector<double> local, out;
    for (const auto& b : p_.blocks) {
      if (b->kind != BlockKind::kObjective) continue;
      gather(*b, x, local);
      out.resize(b->outputs);
      b->values(local.data(), out.data());
      for (double o : out) f += o;
    }
    return f;
  }

  /// max |c|, max(g, 0) over all general constraints.
  double violation(const std::vector<double>& x) const {
    double v = extra_ ? extra_(x) : 0.0;
    std::vector<double> local, out;
    for (const auto& b : p_.blocks) {
      if (b->kind == BlockKind::kObjective) continue;
      gather(*b, x, local);
      out.resize(b->outputs);
      b->values(local.data(), out.data());
      for (double o : out) v = std::max(v, b->kind == BlockKind::kEquality ? std::abs(o) : o);
    }
    return v;
  }

  const std::vector<double>& multipliers() const { return mult_; }

 private:
  void gather(const NlpBlock& b, const std::vector<double>& x, std::vector<double>& local) const {
    local.resize(b.vars.size());
    for (std::size_t i = 0; i < b.vars.size(); ++i) local[i] = x[b.vars[i]];
  }

  // Multiplier-weighted penalty term for one output, its first derivative
  // factor and curvature factor.
  struct Term {
    double value;
    double d1;
    double d2;
  };
  Term penalty(BlockKind kind, double c, double mult) const {
    if (kind == BlockKind::kEquality) {
      return {mult * c + 0.5 * rho_ * c * c, mult + rho_ * c, rho_};
    }
    const double s = mult + rho_ * c;
    if (s <= 0.0) return {-mult * mult / (2.0 * rho_), 0.0, 0.0};
    return {(s * s - mult * mult) / (2.0 * rho_), s, rho_};
  }

  double merit(const std::vector<double>& x) const {
    double m = 0.0;
    std::vector<double> local, out;
    for (std::size_t bi = 0; bi < p_.blocks.size(); ++bi) {
      const NlpBlock& b = *p_.blocks[bi];
      gather(b, x, local);
      out.resize(b.outputs);
      b.values(local.data(), out.data());
      for (int o = 0; o < b.outputs; ++o) {
        if (b.kind == BlockKind::kObjective) {
          m += out[o];
        } else {
          m += penalty(b.kind, out[o], mult_[offsets_[bi] + o]).value;
        }
      }
    }
    return m;
  }

  /// Gradient and (optionally) Hessian triplets of the merit function.
  double merit_derivatives(const std::vector<double>& x, Eigen::VectorXd& grad,
                           std::vector<Eigen::Triplet<double>>* hess) const {
    grad.setZero(p_.n);
    double m = 0.0;
    std::vector<double> local, out;
    Eigen::MatrixXd jac;
    std::vector<Eigen::MatrixXd> hs;
    for (std::size_t bi = 0; bi < p_.blocks.size(); ++bi) {
      const NlpBlock& b = *p_.blocks[bi];
      gather(b, x, local);
      out.resize(b.outputs);
      b.derivatives(local.data(), out.data(), jac, hs);
      const int nv = static_cast<int>(b.vars.size());
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nv, nv);
      Eigen::VectorXd gl = Eigen::VectorXd::Zero(nv);
      for (int o = 0; o < b.outputs; ++o) {
        if (b.kind == BlockKind::kObjective) {
          m += out[o];
          gl += jac.row(o).transpose();
          h += hs[o];
          continue;
        }
        const Term t = penalty(b.kind, out[o], mult_[offsets_[bi] + o]);
        m += t.value;
        if (t.d1 == 0.0 && t.d2 == 0.0) continue;
        gl += t.d1 * jac.row(o).transpose();
        h += t.d1 * hs[o] + t.d2 * jac.row(o).transpose() * jac.row(o);
      }
      for (int i = 0; i < nv; ++i) grad[b.vars[i]] += gl[i];
      if (hess) {
        for (int i = 0; i < nv; ++i) {
          for (int j = 0; j < nv; ++j) {
            if (h(i, j) != 0.0) hess->emplace_back(b.vars[i], b.vars[j], h(i, j));
          }
        }
      }
    }
    return m;
  }

  double projected_gradient_norm(const std::vector<double>& x, const Eigen::VectorXd& g) const {
    double r = 0.0;
    for (int i = 0; i < p_.n; ++i) {
      const double step = std::clamp(x[i] - g[i], p_.lower[i], p_.upper[i]) - x[i];
      r = std::max(r, std::abs(step));
    }
    return r;
  }

  /// Projected Newton on the merit function; returns iterations used.
  int inner_solve(std::vector<double>& x, double tol, int budget) {
    int it = 0;
    Eigen::VectorXd grad;
    std::vector<Eigen::Triplet<double>> trips;
    double shift = 0.0;
    int stagnant = 0;
    while (it < budget) {
      trips.clear();
      const double m0 = merit_derivatives(x, grad, &trips);
      if (projected_gradient_norm(x, grad) <= tol) break;
      ++it;
      // Free variables: not pinned, not at a bound the gradient pushes into.
      std::vector<int> index(p_.n, -1);
      std::vector<int> free;
      for (int i = 0; i < p_.n; ++i) {
        const bool pinned = p_.lower[i] == p_.upper[i];
        const bool blocked = (x[i] <= p_.lower[i] && grad[i] > 0.0) ||
                             (x[i] >= p_.upper[i] && grad[i] < 0.0);
        if (!pinned && !blocked) {
          index[i] = static_cast<int>(free.size());
          free.push_back(i);
        }
      }
      Eigen::VectorXd d = Eigen::VectorXd::Zero(p_.n);
      if (!free.empty()) {
        const int nf = static_cast<int>(free.size());
        std::vector<Eigen::Triplet<double>> reduced;
        reduced.reserve(trips.size() + nf);
        for (const auto& t : trips) {
          const int r = index[t.row()];
          const int c = index[t.col()];
          if (r >= 0 && c >= 0) reduced.emplace_back(r, c, t.value());
        }
        Eigen::SparseMatrix<double> h(nf, nf);
        h.setFromTriplets(reduced.begin(), reduced.end());
        Eigen::VectorXd rhs(nf);
        for (int k = 0; k < nf; ++k) rhs[k] = -grad[free[k]];
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
        // Shift the diagonal until the reduced Hessian is positive definite.
        shift = shift > 0.0 ? shift * 0.1 : 0.0;
        if (shift < 1e-10) shift = 0.0;
        Eigen::VectorXd step;
        while (true) {
          Eigen::SparseMatrix<double> hs = h;
          if (shift > 0.0) {
            for (int k = 0; k < nf; ++k) hs.coeffRef(k, k) += shift;
          }
          llt.compute(hs);
          if (llt.info() == Eigen::Success) {
            step = llt.solve(rhs);
            if (llt.info() == Eigen::Success && step.allFinite() && step.dot(rhs) > 0.0) break;
          }
          shift = shift == 0.0 ? 1e-8 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff()) : shift * 10.0;
          if (shift > 1e20) {
            step = rhs;
            break;
          }
        }
        for (int k = 0; k < nf; ++k) d[free[k]] = step[k];
      }
      // Blocked variables follow the projected gradient.
      for (int i = 0; i < p_.n; ++i) {
        if (index[i] < 0 && p_.lower[i] != p_.upper[i]) d[i] = -grad[i];
      }
      // Projected Armijo backtracking.
      double alpha = 1.0;
      std::vector<double> trial(p_.n);
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        double decrease = 0.0;
        for (int i = 0; i < p_.n; ++i) {
          trial[i] = std::clamp(x[i] + alpha * d[i], p_.lower[i], p_.upper[i]);
          decrease += grad[i] * (trial[i] - x[i]);
        }
        const double m1 = merit(trial);
        if (std::isfinite(m1) && m1 <= m0 + 1e-4 * decrease) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      x = trial;
      // Tiny accepted steps mean the merit is at its rounding floor.
      stagnant = alpha < 1e-6 ? stagnant + 1 : 0;
      if (stagnant >= 3) break;
    }
    return it;
  }

  void update_multipliers(const std::vector<double>& x) {
    std::vector<double> local, out;
    for (std::size_t bi = 0; bi < p_.blocks.size(); ++bi) {
      const NlpBlock& b = *p_.blocks[bi];
      if (b.kind == BlockKind::kObjective) continue;
      gather(b, x, local);
      out.resize(b.outputs);
      b.values(local.data(), out.data());
      for (int o = 0; o < b.outputs; ++o) {
        double& mu = mult_[offsets_[bi] + o];
        mu = b.kind == BlockKind::kEquality ? mu + rho_ * out[o] : std::max(0.0, mu + rho_ * out[o]);
      }
    }
  }

  /// Projected gradient of the Lagrangian with the current multipliers.
  double stationarity(const std::vector<double>& x) const {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p_.n);
    std::vector<double> local, out;
    Eigen::MatrixXd jac;
    std::vector<Eigen::MatrixXd> hs;
    for (std::size_t bi = 0; bi < p_.blocks.size(); ++bi) {
      const NlpBlock& b = *p_.blocks[bi];
      gather(b, x, local);
      out.resize(b.outputs);
      b.derivatives(local.data(), out.data(), jac, hs);
      for (int o = 0; o < b.outputs; ++o) {
        const double w = b.kind == BlockKind::kObjective ? 1.0 : mult_[offsets_[bi] + o];
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < b.vars.size(); ++i) grad[b.vars[i]] += w * jac(o, i);
      }
    }
    return projected_gradient_norm(x, grad);
  }

  const NlpProblem& p_;
  NlpOptions opt_;
  std::function<double(const std::vector<double>&)> extra_;
  std::vector<int> offsets_;
  int n_mult_ = 0;
  std::vector<double> mult_;
  double rho_ = 10.0;
  int stall_count_ = 0;
};

}  // namespace caws
