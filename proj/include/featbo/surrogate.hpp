#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "featbo/encoder.hpp"
#include "featbo/kernels.hpp"
#include "featbo/loss.hpp"
#include "featbo/numopt.hpp"
#include "featbo/rng.hpp"

namespace featbo {

enum class DecoderVariant {
  FullICM,              // one coregionalization matrix over all D outputs
  BlockSharedKernel,    // disjoint output blocks, one shared kernel
  BlockSeparateKernels  // disjoint output blocks, one kernel per block
};

/// Structural choice for the reconstruction decoder.
struct DecoderStructure {
  DecoderVariant variant = DecoderVariant::FullICM;
  int block_size = 3;    // output width per block (block variants)
  int latent_count = 0;  // P for FullICM; 0 means full rank P = D

  /// Resolved (offset, size) output blocks for dimension D. The last block
  /// absorbs the remainder when D is not divisible by block_size.
  std::vector<std::pair<int, int>> blocks(int output_dim) const;
  int kernel_count(int output_dim) const;
  int resolved_latent_count(int output_dim) const;
};

struct ModelOptions {
  int hidden_dim = 20;
  KernelKind kernel = KernelKind::Matern52;
  double noise_variance = 1e-4;
  bool learn_noise = false;
  // When set, the reconstruction likelihood carries its own noise term
  // instead of sharing the observation noise. A compressing feature space
  // cannot reconstruct every coordinate; without this slack the decoder is
  // forced to interpolate the unpredictable ones, its lengthscales collapse,
  // and the Lipschitz feasibility radius shrinks toward zero.
  bool separate_decoder_noise = false;
  double decoder_noise_variance = 1e-2;  // fixed value or log-space init
  bool learn_decoder_noise = true;       // only meaningful when separate
  // Lower bound on the decoder lengthscales during fitting (0: none). The
  // decoder's posterior mean is queried across the whole feature box, and
  // lengthscales far below the data spacing turn it needle-sharp, collapsing
  // the Lipschitz feasibility radius.
  double decoder_lengthscale_floor = 0.0;
  double warp_clip = 1e-6;     // probit warp clip for the decoder targets
  double jitter_scale = 1e-8;  // diagonal jitter = jitter_scale * signal variance
};

struct PosteriorGaussian {
  double mean = 0.0;
  double variance = 0.0;  // clipped at zero
};

namespace detail {
struct ModelState;
}

/// Deterministic segmentation of the flat trainable-parameter vector:
/// encoder weights, response kernel, decoder kernel(s), coregionalization
/// factors, and optionally the log noise variance.
struct ParamLayout {
  Eigen::Index input_dim = 0;
  Eigen::Index feature_dim = 0;
  Eigen::Index hidden_dim = 0;
  Eigen::Index encoder_size = 0;
  Eigen::Index kernel_size = 0;  // per kernel (lengthscales + variance)
  int decoder_kernel_count = 0;
  std::vector<std::pair<int, int>> coreg_shapes;  // (rows, cols) per block
  bool learn_noise = false;
  bool learn_dec_noise = false;
  Eigen::Index total = 0;

  Eigen::Index encoder_offset() const { return 0; }
  Eigen::Index response_kernel_offset() const { return encoder_size; }
  Eigen::Index decoder_kernel_offset(int k) const {
    return encoder_size + kernel_size * (1 + k);
  }
  Eigen::Index coreg_offset(int block) const;
  Eigen::Index noise_offset() const { return total - (learn_dec_noise ? 2 : 1); }
  Eigen::Index dec_noise_offset() const { return total - 1; }

  static ParamLayout make(Eigen::Index input_dim, Eigen::Index feature_dim,
                          const DecoderStructure& structure, const ModelOptions& opts);
};

/// The joint training objective: negative rescaled log marginal likelihood of
/// the response GP on encoded inputs plus (1/D times) the reconstruction
/// multi-output GP on probit-warped inputs, constants dropped. The
/// reconstruction terms are evaluated through the Kronecker algebra, never
/// through an ND x ND matrix. Returns +inf when a factorization fails, which
/// optimizers treat as an infeasible point.
class JointObjective final : public DifferentiableLoss {
 public:
  JointObjective(Eigen::MatrixXd X, Eigen::VectorXd y, Eigen::Index feature_dim,
                 DecoderStructure structure, ModelOptions opts = {});

  Eigen::Index dim() const override { return layout_.total; }
  double value(const Eigen::Ref<const Eigen::VectorXd>& params) const override;
  double value_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& params,
                            Eigen::Ref<Eigen::VectorXd> grad) const override;

  const ParamLayout& layout() const { return layout_; }
  BoxBounds bounds() const;
  Eigen::VectorXd initial_params(Rng& rng) const;

  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& y_standardized() const { return y_std_; }
  double y_mean() const { return y_mean_; }
  double y_scale() const { return y_scale_; }
  const DecoderStructure& structure() const { return structure_; }
  const ModelOptions& options() const { return opts_; }
  Eigen::Index feature_dim() const { return layout_.feature_dim; }

  /// Warped target column block [offset, offset+size) stacked column-major.
  Eigen::VectorXd warped_block(int offset, int size) const;

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_, y_std_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  Eigen::MatrixXd X_warped_;  // probit(clip(X))
  DecoderStructure structure_;
  ModelOptions opts_;
  ParamLayout layout_;
};

/// Convenience wrapper matching the objective's spec-level signature.
double joint_neg_log_marginal(const Eigen::Ref<const Eigen::VectorXd>& params,
                              const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              Eigen::Index feature_dim, const DecoderStructure& structure,
                              const ModelOptions& opts = {});

struct RestartReport {
  double initial_value = 0.0;
  double final_value = 0.0;
  bool converged = false;
  std::vector<double> trace;
};

struct FitReport {
  std::vector<RestartReport> restarts;
  int best_restart = -1;
  bool degraded = false;
};

struct FitConfig {
  int restarts = 3;
  MinimizeOptions optimizer{1e-6, 150, 10};
  std::uint64_t seed = 0;
};

/// Trained joint model. Immutable after construction: all factorizations are
/// computed once from the parameter vector, so concurrent posterior queries
/// are safe and cached state can never go stale.
class JointSurrogate {
 public:
  JointSurrogate(Eigen::VectorXd params, Eigen::MatrixXd X, Eigen::VectorXd y,
                 Eigen::Index feature_dim, DecoderStructure structure, ModelOptions opts = {});

  /// Response posterior at a point in the original box; encodes, then
  /// delegates to the feature-space path (the two are the same code path).
  PosteriorGaussian response_posterior(const Eigen::Ref<const Eigen::VectorXd>& x_star) const;

  /// Response posterior entered at the feature level, in original y units.
  PosteriorGaussian response_posterior_z(const Eigen::Ref<const Eigen::VectorXd>& z_star) const;

  /// Warped-space reconstruction posterior: per-coordinate mean and variance.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> decoder_posterior(
      const Eigen::Ref<const Eigen::VectorXd>& z_star) const;

  /// Mean of the decoder posterior only (cheaper than decoder_posterior).
  Eigen::VectorXd decoder_posterior_mean(const Eigen::Ref<const Eigen::VectorXd>& z_star) const;

  /// Jacobian of the decoder posterior mean, D x d.
  Eigen::MatrixXd decoder_mean_jacobian(const Eigen::Ref<const Eigen::VectorXd>& z_star) const;

  /// Expected squashed reconstruction E[Phi(x~)] = Phi(mu/sqrt(1+var)),
  /// coordinatewise, clamped to [0,1].
  Eigen::VectorXd reconstruct(const Eigen::Ref<const Eigen::VectorXd>& z_star) const;

  Eigen::VectorXd encode_point(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const Eigen::MatrixXd& embedded_training() const;  // N x d
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::Index input_dim() const { return X_.cols(); }
  Eigen::Index feature_dim() const { return feature_dim_; }
  const DecoderStructure& structure() const { return structure_; }
  const ModelOptions& options() const { return opts_; }
  double noise_variance() const;
  double decoder_noise_variance() const;

  bool degraded() const { return report_.degraded; }
  const FitReport& fit_report() const { return report_; }
  void set_fit_report(FitReport r) { report_ = std::move(r); }

  /// Self-describing JSON checkpoint (schema documented in the README).
  std::string to_json() const;
  static JointSurrogate from_json(const std::string& text);

 private:
  Eigen::VectorXd params_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  Eigen::Index feature_dim_;
  DecoderStructure structure_;
  ModelOptions opts_;
  FitReport report_;
  double y_mean_cache_ = 0.0;
  double y_scale_cache_ = 1.0;
  std::shared_ptr<const detail::ModelState> state_;
};

/// Maximum-likelihood fit over seeded restarts; the restart with the lowest
/// joint objective wins. An optional warm start occupies restart slot 0.
JointSurrogate fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index feature_dim,
                   const DecoderStructure& structure, const ModelOptions& opts,
                   const FitConfig& cfg,
                   const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

}  // namespace featbo
