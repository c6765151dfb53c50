#include "featbo/acquisition.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "featbo/math.hpp"
#include "featbo/rng.hpp"

namespace featbo {

double acq_value(const AcquisitionSpec& spec, double mu, double sigma) {
  if (!(spec.beta > 0.0)) throw std::invalid_argument("acq_value: beta must be positive");
  if (!std::isfinite(spec.y_min)) throw std::invalid_argument("acq_value: y_min must be finite");
  if (sigma < 0.0) throw std::invalid_argument("acq_value: sigma must be nonnegative");

  if (sigma == 0.0) {
    switch (spec.kind) {
      case AcquisitionKind::PI: return mu < spec.y_min ? 1.0 : 0.0;
      case AcquisitionKind::EI: return std::max(spec.y_min - mu, 0.0);
      case AcquisitionKind::UCB: return -mu;
    }
  }
  const double z = (spec.y_min - mu) / sigma;
  switch (spec.kind) {
    case AcquisitionKind::PI: return norm_cdf(z);
    case AcquisitionKind::EI: return sigma * (z * norm_cdf(z) + norm_pdf(z));
    case AcquisitionKind::UCB: return -mu + spec.beta * sigma;
  }
  return 0.0;
}

namespace {

// Evenly strided subset of the embedded training rows, used as extra
// candidate starts for the feature-space searches.
std::vector<Eigen::VectorXd> anchor_rows(const Eigen::MatrixXd& Z, int max_count) {
  std::vector<Eigen::VectorXd> out;
  const Eigen::Index n = Z.rows();
  if (n == 0 || max_count <= 0) return out;
  const Eigen::Index take = std::min<Eigen::Index>(n, max_count);
  for (Eigen::Index i = 0; i < take; ++i) {
    const Eigen::Index row = (i * n) / take;
    out.push_back(Z.row(row));
  }
  return out;
}

// Embedded training rows ranked by a score (ties by row index). When the
// feasible region degenerates to small balls around the data, these anchors
// decide which balls the constrained search can reach, so they are chosen by
// acquisition value rather than position.
std::vector<Eigen::VectorXd> ranked_anchor_rows(const Eigen::MatrixXd& Z,
                                                const std::function<double(const Eigen::VectorXd&)>& score,
                                                int max_count) {
  const Eigen::Index n = Z.rows();
  std::vector<std::pair<double, Eigen::Index>> ranked(n);
  for (Eigen::Index r = 0; r < n; ++r) ranked[r] = {score(Z.row(r)), r};
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Eigen::VectorXd> out;
  const Eigen::Index take = std::min<Eigen::Index>(n, max_count);
  for (Eigen::Index i = 0; i < take; ++i) out.push_back(Z.row(ranked[i].second));
  return out;
}

}  // namespace

double estimate_lipschitz(const JointSurrogate& s, const BoxBounds& feature_box,
                          std::uint64_t seed, const LipschitzOptions& options) {
  if (feature_box.dim() != s.feature_dim()) {
    throw std::invalid_argument("estimate_lipschitz: box dimension must match the feature space");
  }
  const Objective slope = [&s](const Eigen::VectorXd& z) {
    const Eigen::MatrixXd J = s.decoder_mean_jacobian(z);
    return J.rowwise().norm().maxCoeff();
  };
  const auto anchors = anchor_rows(s.embedded_training(), options.max_anchor_starts);
  const OptimResult res = multistart_maximize(slope, feature_box, options.search, seed, anchors);
  return std::max(options.floor, res.f_opt);
}

ConstraintState::ConstraintState(const JointSurrogate& s, double lipschitz)
    : Z_t_(s.embedded_training()), L_(std::max(lipschitz, 1e-6)) {
  mu_max_.resize(Z_t_.rows());
  for (Eigen::Index r = 0; r < Z_t_.rows(); ++r) {
    mu_max_[r] = s.decoder_posterior_mean(Z_t_.row(r)).cwiseAbs().maxCoeff();
  }
}

ConstraintState::ConstraintState(Eigen::MatrixXd embedded_points, Eigen::VectorXd mu_max_per_point,
                                 double lipschitz)
    : Z_t_(std::move(embedded_points)),
      mu_max_(std::move(mu_max_per_point)),
      L_(std::max(lipschitz, 1e-6)) {
  if (Z_t_.rows() != mu_max_.size() || Z_t_.rows() == 0) {
    throw std::invalid_argument("ConstraintState: need one mu_max per embedded point");
  }
}

double constraint_value(const Eigen::Ref<const Eigen::VectorXd>& z, const ConstraintState& cs) {
  const Eigen::MatrixXd& Z = cs.embedded_points();
  if (z.size() != Z.cols()) {
    throw std::invalid_argument("constraint_value: feature dimension mismatch");
  }
  Eigen::Index nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const double d = (Z.row(r).transpose() - z).norm();
    if (d < best) {
      best = d;
      nearest = r;
    }
  }
  return cs.mu_max(nearest) / cs.lipschitz() - best;
}

Proposal propose(const JointSurrogate& s, const AcquisitionSpec& spec, bool constrained,
                 std::uint64_t seed, const ProposeOptions& options) {
  const BoxBounds box = BoxBounds::unit(s.feature_dim());
  const Objective acq = [&s, &spec](const Eigen::VectorXd& z) {
    const PosteriorGaussian p = s.response_posterior_z(z);
    return acq_value(spec, p.mean, std::sqrt(std::max(0.0, p.variance)));
  };

  const Rng streams(seed);
  Proposal prop;
  if (!constrained) {
    const OptimResult res = multistart_maximize(acq, box, options.search, streams.child(0).seed());
    prop.z_star = res.x_opt;
    prop.acquisition = res.f_opt;
    prop.fallback = res.fallback;
    return prop;
  }

  const double L = estimate_lipschitz(s, box, streams.child(1).seed(), options.lipschitz);
  const ConstraintState cs(s, L);
  const Objective g = [&cs](const Eigen::VectorXd& z) { return constraint_value(z, cs); };
  const auto anchors =
      ranked_anchor_rows(s.embedded_training(), acq, options.max_anchor_starts);
  const OptimResult res =
      maximize_constrained(acq, g, box, options.search, streams.child(0).seed(), anchors);
  prop.z_star = res.x_opt;
  prop.acquisition = res.f_opt;
  prop.fallback = res.fallback;
  prop.lipschitz = L;
  prop.constraint = constraint_value(res.x_opt, cs);
  return prop;
}

}  // namespace featbo
