#pragma once

// Matern-5/2 Gaussian-process surrogate used by the trust-region optimizer.
// Inputs live in the unit cube; targets are standardized internally.

#include <Eigen/Dense>
#include <cstdint>

#include "opt_common.hpp"

namespace ampsizer::detail_opt {

class Gp {
 public:
  // Fits to (x, y); when refit_hypers, runs multistart gradient ascent on the
  // log marginal likelihood (warm-started from the previous optimum when one
  // exists), otherwise only refreshes the factorization with new data.
  // Throws SurrogateError when the kernel matrix cannot be factorized even
  // with escalated jitter.
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Rng& rng,
           bool refit_hypers);

  // Joint posterior samples at the candidate rows; returns cand.rows() x
  // n_samples.  Values are on the original target scale.
  Eigen::MatrixXd sample_joint(const Eigen::MatrixXd& cand, int n_samples, Rng& rng) const;

  // ARD lengthscales in unit-cube units.
  Eigen::VectorXd lengthscales() const { return log_ls_.array().exp(); }

  bool fitted() const { return fitted_; }

 private:
  struct Likelihood {
    double value = 0.0;
    Eigen::VectorXd grad;  // d(log_ls), d(log_sv), d(log_noise)
  };
  Eigen::MatrixXd kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;
  Likelihood likelihood(const Eigen::VectorXd& theta) const;
  void set_theta(const Eigen::VectorXd& theta);
  Eigen::VectorXd get_theta() const;
  void refresh_factorization();

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;  // standardized
  double y_mean_ = 0.0, y_std_ = 1.0;
  Eigen::VectorXd log_ls_;
  double log_sv_ = 0.0;
  double log_noise_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  bool fitted_ = false;
  bool have_hypers_ = false;
};

}  // namespace ampsizer::detail_opt
