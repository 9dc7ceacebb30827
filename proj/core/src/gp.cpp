#include "gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ampsizer/errors.hpp"

namespace ampsizer::detail_opt {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;
// Hyperparameter bounds (log space): lengthscale, signal variance, noise.
const double kLsLo = std::log(0.005), kLsHi = std::log(2.0);
const double kSvLo = std::log(0.05), kSvHi = std::log(20.0);
const double kNoiseLo = std::log(5e-4), kNoiseHi = std::log(2e-2);

double matern52(double r) {
  return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r);
}

// Cholesky with escalating diagonal jitter; empty result on failure.
Eigen::LLT<Eigen::MatrixXd> robust_llt(Eigen::MatrixXd k, bool* ok) {
  const int n = static_cast<int>(k.rows());
  const double scale = std::max(k.diagonal().mean(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd kj = k;
    if (jitter > 0.0) kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      *ok = true;
      return llt;
    }
    jitter = jitter == 0.0 ? 1e-8 * scale : jitter * 10.0;
  }
  *ok = false;
  return Eigen::LLT<Eigen::MatrixXd>(Eigen::MatrixXd::Identity(n, n));
}

}  // namespace

Eigen::MatrixXd Gp::kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const {
  const double sv = std::exp(log_sv_);
  const Eigen::VectorXd inv_ls2 = (-2.0 * log_ls_).array().exp();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double d = a(i, c) - b(j, c);
        r2 += d * d * inv_ls2(c);
      }
      k(i, j) = sv * matern52(std::sqrt(r2));
    }
  return k;
}

Eigen::VectorXd Gp::get_theta() const {
  Eigen::VectorXd theta(log_ls_.size() + 2);
  theta.head(log_ls_.size()) = log_ls_;
  theta(log_ls_.size()) = log_sv_;
  theta(log_ls_.size() + 1) = log_noise_;
  return theta;
}

void Gp::set_theta(const Eigen::VectorXd& theta) {
  const Eigen::Index d = theta.size() - 2;
  log_ls_ = theta.head(d);
  log_sv_ = theta(d);
  log_noise_ = theta(d + 1);
}

Gp::Likelihood Gp::likelihood(const Eigen::VectorXd& theta) const {
  Gp tmp = *this;
  tmp.set_theta(theta);
  const Eigen::Index n = x_.rows(), d = x_.cols();
  Likelihood out;
  out.grad = Eigen::VectorXd::Zero(theta.size());

  const double sv = std::exp(tmp.log_sv_);
  const double noise = std::exp(tmp.log_noise_);
  Eigen::MatrixXd ks = tmp.kernel(x_, x_);  // signal part
  Eigen::MatrixXd k = ks;
  k.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  Eigen::VectorXd alpha = llt.solve(y_);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
  out.value = -0.5 * y_.dot(alpha) - logdet -
              0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846);
  if (!std::isfinite(out.value)) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }

  // dL/dtheta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta).
  Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd a = alpha * alpha.transpose() - kinv;

  const Eigen::VectorXd inv_ls2 = (-2.0 * tmp.log_ls_).array().exp();
  // Shared radial factor for the lengthscale gradients:
  // dK/dlog_ls_c = sv * (5/3)(1 + sqrt5 r) e^{-sqrt5 r} * d_c^2 / ls_c^2.
  Eigen::MatrixXd radial(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        const double diff = x_(i, c) - x_(j, c);
        r2 += diff * diff * inv_ls2(c);
      }
      const double r = std::sqrt(r2);
      radial(i, j) = sv * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
    }
  for (Eigen::Index c = 0; c < d; ++c) {
    double g = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double diff = x_(i, c) - x_(j, c);
        g += a(i, j) * radial(i, j) * diff * diff * inv_ls2(c);
      }
    out.grad(c) = 0.5 * g;
  }
  out.grad(d) = 0.5 * a.cwiseProduct(ks).sum();
  out.grad(d + 1) = 0.5 * noise * a.trace();
  return out;
}

void Gp::refresh_factorization() {
  Eigen::MatrixXd k = kernel(x_, x_);
  k.diagonal().array() += std::exp(log_noise_);
  bool ok = false;
  chol_ = robust_llt(std::move(k), &ok);
  if (!ok)
    throw SurrogateError("surrogate kernel matrix is not positive definite at maximum jitter");
  alpha_ = chol_.solve(y_);
  fitted_ = true;
}

void Gp::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Rng& rng,
             bool refit_hypers) {
  x_ = x;
  y_mean_ = y.mean();
  const Eigen::VectorXd centered = y.array() - y_mean_;
  y_std_ = std::sqrt(centered.squaredNorm() / static_cast<double>(y.size()));
  if (!(y_std_ > 1e-12)) y_std_ = 1.0;
  y_ = centered / y_std_;
  const Eigen::Index d = x.cols();
  if (log_ls_.size() != d) have_hypers_ = false;

  if (refit_hypers || !have_hypers_) {
    Eigen::VectorXd lo(d + 2), hi(d + 2);
    lo.head(d).setConstant(kLsLo);
    hi.head(d).setConstant(kLsHi);
    lo(d) = kSvLo;
    hi(d) = kSvHi;
    lo(d + 1) = kNoiseLo;
    hi(d + 1) = kNoiseHi;

    std::vector<Eigen::VectorXd> starts;
    if (have_hypers_) {
      starts.push_back(get_theta());
      starts.push_back(Eigen::VectorXd(d + 2));  // plus one random restart
    } else {
      Eigen::VectorXd heur(d + 2);
      heur.head(d).setConstant(std::log(0.5));
      heur(d) = std::log(1.0);
      heur(d + 1) = std::log(1e-3);
      starts.push_back(heur);
      for (int s = 0; s < 4; ++s) starts.push_back(Eigen::VectorXd(d + 2));
    }
    for (size_t s = 1; s < starts.size(); ++s) {
      for (Eigen::Index c = 0; c < d; ++c)
        starts[s](c) = rng.uniform(std::log(0.05), std::log(1.0));
      starts[s](d) = rng.uniform(std::log(0.1), std::log(5.0));
      starts[s](d + 1) = rng.uniform(std::log(5e-4), std::log(1e-2));
    }

    double best_l = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta = starts[0];
    for (Eigen::VectorXd theta : starts) {
      theta = theta.cwiseMax(lo).cwiseMin(hi);
      Likelihood cur = likelihood(theta);
      double step = 0.1;
      for (int iter = 0; iter < 50 && std::isfinite(cur.value); ++iter) {
        bool improved = false;
        double prev = cur.value;
        for (int bt = 0; bt < 12; ++bt) {
          Eigen::VectorXd cand =
              (theta + step * cur.grad).cwiseMax(lo).cwiseMin(hi);
          Likelihood cl = likelihood(cand);
          if (cl.value > cur.value + 1e-9) {
            theta = cand;
            cur = cl;
            step *= 1.3;
            improved = true;
            break;
          }
          step *= 0.5;
        }
        if (!improved || cur.value - prev < 1e-6) break;
      }
      if (cur.value > best_l) {
        best_l = cur.value;
        best_theta = theta;
      }
    }
    set_theta(best_theta);
    have_hypers_ = true;
  }
  refresh_factorization();
}

Eigen::MatrixXd Gp::sample_joint(const Eigen::MatrixXd& cand, int n_samples,
                                 Rng& rng) const {
  if (!fitted_) throw SurrogateError("surrogate sampled before fitting");
  const Eigen::Index m = cand.rows();
  Eigen::MatrixXd k_star = kernel(x_, cand);                     // n x m
  Eigen::VectorXd mu = k_star.transpose() * alpha_;              // standardized
  Eigen::MatrixXd v = chol_.matrixL().solve(k_star);             // n x m
  Eigen::MatrixXd sigma = kernel(cand, cand) - v.transpose() * v;
  bool ok = false;
  Eigen::LLT<Eigen::MatrixXd> sl = robust_llt(std::move(sigma), &ok);
  if (!ok) throw SurrogateError("posterior covariance is not positive definite");
  Eigen::MatrixXd out(m, n_samples);
  Eigen::VectorXd z(m);
  for (int s = 0; s < n_samples; ++s) {
    for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
    out.col(s) = ((mu + sl.matrixL() * z).array() * y_std_ + y_mean_).matrix();
  }
  return out;
}

}  // namespace ampsizer::detail_opt
