#include "featbo/surrogate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "featbo/common.hpp"
#include "featbo/kron.hpp"
#include "featbo/math.hpp"

namespace featbo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd warp_inputs(const Eigen::MatrixXd& X, double clip) {
  return X.unaryExpr([clip](double v) {
    return probit(std::min(1.0 - clip, std::max(clip, v)));
  });
}

std::string kernel_kind_name(KernelKind k) {
  return k == KernelKind::Matern52 ? "matern52" : "squared-exponential";
}

KernelKind kernel_kind_from_name(const std::string& s) {
  if (s == "matern52") return KernelKind::Matern52;
  if (s == "squared-exponential") return KernelKind::SquaredExponential;
  throw std::invalid_argument("unknown kernel kind: " + s);
}

std::string variant_name(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::FullICM: return "full-icm";
    case DecoderVariant::BlockSharedKernel: return "block-shared";
    case DecoderVariant::BlockSeparateKernels: return "block-separate";
  }
  return "full-icm";
}

DecoderVariant variant_from_name(const std::string& s) {
  if (s == "full-icm") return DecoderVariant::FullICM;
  if (s == "block-shared") return DecoderVariant::BlockSharedKernel;
  if (s == "block-separate") return DecoderVariant::BlockSeparateKernels;
  throw std::invalid_argument("unknown decoder variant: " + s);
}

}  // namespace

std::vector<std::pair<int, int>> DecoderStructure::blocks(int output_dim) const {
  std::vector<std::pair<int, int>> out;
  if (variant == DecoderVariant::FullICM) {
    out.emplace_back(0, output_dim);
    return out;
  }
  if (block_size < 1) throw std::invalid_argument("DecoderStructure: block_size must be >= 1");
  for (int off = 0; off < output_dim; off += block_size) {
    out.emplace_back(off, std::min(block_size, output_dim - off));
  }
  return out;
}

int DecoderStructure::kernel_count(int output_dim) const {
  if (variant == DecoderVariant::BlockSeparateKernels) {
    return static_cast<int>(blocks(output_dim).size());
  }
  return 1;
}

int DecoderStructure::resolved_latent_count(int output_dim) const {
  if (latent_count > 0) return latent_count;
  return output_dim;
}

Eigen::Index ParamLayout::coreg_offset(int block) const {
  Eigen::Index at = encoder_size + kernel_size * (1 + decoder_kernel_count);
  for (int b = 0; b < block; ++b) {
    at += static_cast<Eigen::Index>(coreg_shapes[b].first) * coreg_shapes[b].second;
  }
  return at;
}

ParamLayout ParamLayout::make(Eigen::Index input_dim, Eigen::Index feature_dim,
                              const DecoderStructure& structure, const ModelOptions& opts) {
  ParamLayout l;
  l.input_dim = input_dim;
  l.feature_dim = feature_dim;
  l.hidden_dim = opts.hidden_dim;
  l.encoder_size = l.hidden_dim * input_dim + l.hidden_dim + feature_dim * l.hidden_dim + feature_dim;
  l.kernel_size = feature_dim + 1;
  l.decoder_kernel_count = structure.kernel_count(static_cast<int>(input_dim));
  if (structure.variant == DecoderVariant::FullICM) {
    l.coreg_shapes.emplace_back(static_cast<int>(input_dim),
                                structure.resolved_latent_count(static_cast<int>(input_dim)));
  } else {
    for (auto [off, size] : structure.blocks(static_cast<int>(input_dim))) {
      (void)off;
      l.coreg_shapes.emplace_back(size, size);
    }
  }
  l.learn_noise = opts.learn_noise;
  l.learn_dec_noise = opts.separate_decoder_noise && opts.learn_decoder_noise;
  Eigen::Index total = l.encoder_size + l.kernel_size * (1 + l.decoder_kernel_count);
  for (auto [r, c] : l.coreg_shapes) total += static_cast<Eigen::Index>(r) * c;
  if (l.learn_noise) total += 1;
  if (l.learn_dec_noise) total += 1;
  l.total = total;
  return l;
}

namespace detail {

/// Everything derivable from one parameter vector and the training data:
/// encoder activations, response factorization, decoder eigensystems and
/// posterior helpers. Built once, then immutable.
struct ModelState {
  FeatureMapParams encoder;
  EncodeCache enc;
  KernelParams resp_kernel;
  double resp_jitter = 0.0;
  double noise_variance = 0.0;      // response likelihood
  double dec_noise_variance = 0.0;  // reconstruction likelihood
  Eigen::LLT<Eigen::MatrixXd> Ky_llt;
  Eigen::VectorXd alpha_y;  // K_y^{-1} y_std

  struct Kernel {
    KernelParams params;
    double jitter = 0.0;
    Eigen::MatrixXd K;  // kernel matrix with jitter on the diagonal
    Eigen::MatrixXd Qk;
    Eigen::VectorXd lk;
  };
  std::vector<Kernel> dec_kernels;

  struct Block {
    int offset = 0, size = 0, kernel = 0;
    Eigen::MatrixXd A, B;
    Eigen::MatrixXd Qb;
    Eigen::VectorXd lb;
    Eigen::VectorXd xv;        // warped targets, column-stacked, size*N
    Eigen::VectorXd alpha_v;   // (B kron K + s2 I)^{-1} xv
    Eigen::MatrixXd alpha_mat; // N x size view of alpha_v
    Eigen::MatrixXd M;         // size x N, B * alpha_mat^T
    Eigen::MatrixXd QbtB;      // Qb^T B
  };
  std::vector<Block> blocks;

  bool ok = false;
};

}  // namespace detail

namespace {

using detail::ModelState;

struct SlicedParams {
  FeatureMapParams encoder;
  KernelParams resp_kernel;
  std::vector<KernelParams> dec_kernels;
  std::vector<Eigen::MatrixXd> coreg;
  double noise_variance;
  double dec_noise_variance;
};

SlicedParams slice_params(const Eigen::Ref<const Eigen::VectorXd>& params, const ParamLayout& l,
                          const ModelOptions& opts) {
  if (params.size() != l.total) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(params.size()) +
                                ", model expects " + std::to_string(l.total));
  }
  SlicedParams s;
  s.encoder = FeatureMapParams::unflatten(params.segment(l.encoder_offset(), l.encoder_size),
                                          l.input_dim, l.hidden_dim, l.feature_dim);
  s.resp_kernel = KernelParams::unflatten(params.segment(l.response_kernel_offset(), l.kernel_size),
                                          opts.kernel);
  for (int k = 0; k < l.decoder_kernel_count; ++k) {
    s.dec_kernels.push_back(
        KernelParams::unflatten(params.segment(l.decoder_kernel_offset(k), l.kernel_size), opts.kernel));
  }
  for (std::size_t b = 0; b < l.coreg_shapes.size(); ++b) {
    const auto [r, c] = l.coreg_shapes[b];
    s.coreg.push_back(Eigen::Map<const Eigen::MatrixXd>(params.data() + l.coreg_offset(static_cast<int>(b)), r, c));
  }
  s.noise_variance = l.learn_noise ? std::exp(params[l.noise_offset()]) : opts.noise_variance;
  if (!opts.separate_decoder_noise) {
    s.dec_noise_variance = s.noise_variance;
  } else if (l.learn_dec_noise) {
    s.dec_noise_variance = std::exp(params[l.dec_noise_offset()]);
  } else {
    s.dec_noise_variance = opts.decoder_noise_variance;
  }
  return s;
}

std::shared_ptr<ModelState> build_state(const Eigen::Ref<const Eigen::VectorXd>& params,
                                        const Eigen::MatrixXd& X, const Eigen::VectorXd& y_std,
                                        const Eigen::MatrixXd& X_warped, const ParamLayout& layout,
                                        const DecoderStructure& structure, const ModelOptions& opts) {
  auto st = std::make_shared<ModelState>();
  SlicedParams sp = slice_params(params, layout, opts);
  st->encoder = std::move(sp.encoder);
  st->resp_kernel = std::move(sp.resp_kernel);
  st->noise_variance = sp.noise_variance;
  st->dec_noise_variance = sp.dec_noise_variance;

  const Eigen::Index n = X.rows();
  st->enc = encode_with_cache(st->encoder, X);
  if (!st->enc.Z.allFinite()) return st;

  // Response side: dense Cholesky of K_y.
  st->resp_jitter = opts.jitter_scale * st->resp_kernel.signal_variance();
  Eigen::MatrixXd Ky = kernel_matrix(st->resp_kernel, st->enc.Z, st->enc.Z);
  Ky.diagonal().array() += st->resp_jitter + st->noise_variance;
  if (!Ky.allFinite()) return st;
  st->Ky_llt.compute(Ky);
  if (st->Ky_llt.info() != Eigen::Success) return st;
  st->alpha_y = st->Ky_llt.solve(y_std);

  // Decoder side: factorwise eigensystems, never an ND x ND matrix.
  for (const auto& kp : sp.dec_kernels) {
    ModelState::Kernel kc;
    kc.params = kp;
    kc.jitter = opts.jitter_scale * kp.signal_variance();
    kc.K = kernel_matrix(kp, st->enc.Z, st->enc.Z);
    kc.K.diagonal().array() += kc.jitter;
    if (!kc.K.allFinite()) return st;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kc.K);
    if (es.info() != Eigen::Success) return st;
    kc.Qk = es.eigenvectors();
    kc.lk = es.eigenvalues().cwiseMax(0.0);
    st->dec_kernels.push_back(std::move(kc));
  }

  const auto blocks = structure.blocks(static_cast<int>(X.cols()));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    ModelState::Block blk;
    blk.offset = blocks[b].first;
    blk.size = blocks[b].second;
    blk.kernel = (structure.variant == DecoderVariant::BlockSeparateKernels) ? static_cast<int>(b) : 0;
    blk.A = sp.coreg[b];
    blk.B = blk.A * blk.A.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.B);
    if (es.info() != Eigen::Success) return st;
    blk.Qb = es.eigenvectors();
    blk.lb = es.eigenvalues().cwiseMax(0.0);

    blk.xv.resize(static_cast<Eigen::Index>(blk.size) * n);
    for (int i = 0; i < blk.size; ++i) {
      blk.xv.segment(static_cast<Eigen::Index>(i) * n, n) = X_warped.col(blk.offset + i);
    }

    const auto& kc = st->dec_kernels[blk.kernel];
    kron::KronEig ke;
    ke.eigvec_factors = {blk.Qb, kc.Qk};
    ke.eigval_factors = {blk.lb, kc.lk};
    blk.alpha_v =
        kron::solve_noisy(kron::NoisyKron(std::move(ke), st->dec_noise_variance), blk.xv);
    blk.alpha_mat = Eigen::Map<const Eigen::MatrixXd>(blk.alpha_v.data(), n, blk.size);
    blk.M = blk.B * blk.alpha_mat.transpose();
    blk.QbtB = blk.Qb.transpose() * blk.B;
    st->blocks.push_back(std::move(blk));
  }
  st->ok = true;
  return st;
}

double response_term(const ModelState& st, const Eigen::VectorXd& y_std) {
  double logdet = 0.0;
  const auto& L = st.Ky_llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
  return y_std.dot(st.alpha_y) + logdet;
}

double decoder_term(const ModelState& st) {
  double acc = 0.0;
  for (const auto& blk : st.blocks) {
    const auto& kc = st.dec_kernels[blk.kernel];
    acc += blk.xv.dot(blk.alpha_v);
    for (Eigen::Index p = 0; p < blk.lb.size(); ++p) {
      for (Eigen::Index q = 0; q < kc.lk.size(); ++q) {
        acc += std::log(blk.lb[p] * kc.lk[q] + st.dec_noise_variance);
      }
    }
  }
  return acc;
}

}  // namespace

JointObjective::JointObjective(Eigen::MatrixXd X, Eigen::VectorXd y, Eigen::Index feature_dim,
                               DecoderStructure structure, ModelOptions opts)
    : X_(std::move(X)), y_(std::move(y)), structure_(structure), opts_(opts) {
  if (X_.rows() != y_.size()) {
    throw std::invalid_argument("JointObjective: X and y row counts differ");
  }
  if (X_.rows() < 2) {
    throw std::invalid_argument("JointObjective: need at least two observations");
  }
  if (feature_dim < 1 || feature_dim > X_.cols()) {
    throw std::invalid_argument("JointObjective: feature dimension must be in [1, D]");
  }
  y_mean_ = y_.mean();
  const double var = (y_.array() - y_mean_).square().mean();
  y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  y_std_ = (y_.array() - y_mean_) / y_scale_;
  X_warped_ = warp_inputs(X_, opts_.warp_clip);
  layout_ = ParamLayout::make(X_.cols(), feature_dim, structure_, opts_);
}

Eigen::VectorXd JointObjective::warped_block(int offset, int size) const {
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd out(static_cast<Eigen::Index>(size) * n);
  for (int i = 0; i < size; ++i) out.segment(static_cast<Eigen::Index>(i) * n, n) = X_warped_.col(offset + i);
  return out;
}

double JointObjective::value(const Eigen::Ref<const Eigen::VectorXd>& params) const {
  auto st = build_state(params, X_, y_std_, X_warped_, layout_, structure_, opts_);
  if (!st->ok) return kInf;
  const double v = response_term(*st, y_std_) +
                   decoder_term(*st) / static_cast<double>(X_.cols());
  return std::isfinite(v) ? v : kInf;
}

double JointObjective::value_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& params,
                                          Eigen::Ref<Eigen::VectorXd> grad) const {
  if (grad.size() != layout_.total) {
    throw std::invalid_argument("value_and_gradient: gradient buffer has wrong length");
  }
  grad.setZero();
  auto st = build_state(params, X_, y_std_, X_warped_, layout_, structure_, opts_);
  if (!st->ok) return kInf;

  const Eigen::Index n = X_.rows();
  const double D = static_cast<double>(X_.cols());
  const double inv_d = 1.0 / D;
  const double value = response_term(*st, y_std_) + decoder_term(*st) * inv_d;
  if (!std::isfinite(value)) return kInf;

  // Response adjoint S_y = K_y^{-1} - alpha alpha^T.
  Eigen::MatrixXd Kinv = st->Ky_llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd Sy = Kinv - st->alpha_y * st->alpha_y.transpose();
  double d_s2_resp = Sy.trace();
  double d_s2_dec = 0.0;

  KernelContraction rc = kernel_gradient_contraction(st->resp_kernel, st->enc.Z, Sy);
  grad.segment(layout_.response_kernel_offset(), layout_.kernel_size - 1) = rc.d_log_lengthscales;
  grad[layout_.response_kernel_offset() + layout_.kernel_size - 1] =
      rc.d_log_signal_variance + st->resp_jitter * Sy.trace();
  Eigen::MatrixXd dZ = rc.dZ;

  // Decoder adjoints, block by block; K_V^{-1} enters only through its
  // partial traces, which collapse to diagonal reweightings of Q_k and Q_b.
  for (std::size_t b = 0; b < st->blocks.size(); ++b) {
    const auto& blk = st->blocks[b];
    const auto& kc = st->dec_kernels[blk.kernel];
    const Eigen::Index s = blk.size;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);   // sum_p lb_p / (lb_p lk_q + s2)
    Eigen::VectorXd v = Eigen::VectorXd::Zero(s);   // sum_q lk_q / (lb_p lk_q + s2)
    double trace_inv = 0.0;
    for (Eigen::Index p = 0; p < s; ++p) {
      for (Eigen::Index q = 0; q < n; ++q) {
        const double denom = blk.lb[p] * kc.lk[q] + st->dec_noise_variance;
        w[q] += blk.lb[p] / denom;
        v[p] += kc.lk[q] / denom;
        trace_inv += 1.0 / denom;
      }
    }

    const Eigen::MatrixXd aB = blk.alpha_mat * blk.B;  // N x s
    Eigen::MatrixXd Sc = kc.Qk * w.asDiagonal() * kc.Qk.transpose();
    Sc.noalias() -= aB * blk.alpha_mat.transpose();
    Eigen::MatrixXd Sb = blk.Qb * v.asDiagonal() * blk.Qb.transpose();
    Sb.noalias() -= blk.alpha_mat.transpose() * kc.K * blk.alpha_mat;

    // dL/dA = 2 Sb A (Sb symmetric), scaled by the 1/D rebalance.
    const Eigen::MatrixXd dA = (2.0 * inv_d) * (Sb * blk.A);
    Eigen::Map<Eigen::MatrixXd>(grad.data() + layout_.coreg_offset(static_cast<int>(b)), dA.rows(),
                                dA.cols()) += dA;

    KernelContraction cc = kernel_gradient_contraction(kc.params, st->enc.Z, Sc);
    const Eigen::Index koff = layout_.decoder_kernel_offset(blk.kernel);
    grad.segment(koff, layout_.kernel_size - 1) += inv_d * cc.d_log_lengthscales;
    grad[koff + layout_.kernel_size - 1] +=
        inv_d * (cc.d_log_signal_variance + kc.jitter * Sc.trace());
    dZ += inv_d * cc.dZ;

    d_s2_dec += inv_d * (trace_inv - blk.alpha_v.squaredNorm());
  }

  grad.segment(layout_.encoder_offset(), layout_.encoder_size) =
      encode_backprop(st->encoder, X_, st->enc, dZ);

  if (layout_.learn_noise) {
    const double shared = opts_.separate_decoder_noise ? d_s2_resp : d_s2_resp + d_s2_dec;
    grad[layout_.noise_offset()] = st->noise_variance * shared;
  }
  if (layout_.learn_dec_noise) {
    grad[layout_.dec_noise_offset()] = st->dec_noise_variance * d_s2_dec;
  }
  return value;
}

BoxBounds JointObjective::bounds() const {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(layout_.total, -30.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(layout_.total, 30.0);
  for (int k = -1; k < layout_.decoder_kernel_count; ++k) {
    const Eigen::Index off =
        k < 0 ? layout_.response_kernel_offset() : layout_.decoder_kernel_offset(k);
    lo.segment(off, layout_.kernel_size).setConstant(-10.0);
    hi.segment(off, layout_.kernel_size).setConstant(10.0);
    if (k >= 0 && opts_.decoder_lengthscale_floor > 0.0) {
      lo.segment(off, layout_.kernel_size - 1)
          .setConstant(std::log(opts_.decoder_lengthscale_floor));
    }
  }
  if (layout_.learn_noise) {
    lo[layout_.noise_offset()] = -20.0;
    hi[layout_.noise_offset()] = 2.0;
  }
  if (layout_.learn_dec_noise) {
    lo[layout_.dec_noise_offset()] = std::log(1e-6);
    hi[layout_.dec_noise_offset()] = 0.0;
  }
  return BoxBounds(std::move(lo), std::move(hi));
}

Eigen::VectorXd JointObjective::initial_params(Rng& rng) const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(layout_.total);
  FeatureMapParams enc = FeatureMapParams::init(layout_.input_dim, layout_.hidden_dim,
                                                layout_.feature_dim, rng);
  p.segment(layout_.encoder_offset(), layout_.encoder_size) = enc.flatten();
  // log-lengthscales and log-variances start at zero (already zeroed)
  for (std::size_t b = 0; b < layout_.coreg_shapes.size(); ++b) {
    const auto [r, c] = layout_.coreg_shapes[b];
    Eigen::MatrixXd A(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) A(i, j) = (i == j ? 0.5 : 0.0) + rng.uniform(-0.05, 0.05);
    Eigen::Map<Eigen::MatrixXd>(p.data() + layout_.coreg_offset(static_cast<int>(b)), r, c) = A;
  }
  if (layout_.learn_noise) {
    p[layout_.noise_offset()] =
        std::min(2.0, std::max(-20.0, std::log(opts_.noise_variance)));
  }
  if (layout_.learn_dec_noise) {
    p[layout_.dec_noise_offset()] =
        std::min(0.0, std::max(std::log(1e-6), std::log(opts_.decoder_noise_variance)));
  }
  return p;
}

double joint_neg_log_marginal(const Eigen::Ref<const Eigen::VectorXd>& params,
                              const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              Eigen::Index feature_dim, const DecoderStructure& structure,
                              const ModelOptions& opts) {
  return JointObjective(X, y, feature_dim, structure, opts).value(params);
}

JointSurrogate::JointSurrogate(Eigen::VectorXd params, Eigen::MatrixXd X, Eigen::VectorXd y,
                               Eigen::Index feature_dim, DecoderStructure structure,
                               ModelOptions opts)
    : params_(std::move(params)),
      X_(std::move(X)),
      y_(std::move(y)),
      feature_dim_(feature_dim),
      structure_(structure),
      opts_(opts) {
  if (X_.rows() != y_.size() || X_.rows() < 1) {
    throw std::invalid_argument("JointSurrogate: need N >= 1 rows with matching y");
  }
  if (feature_dim_ < 1 || feature_dim_ > X_.cols()) {
    throw std::invalid_argument("JointSurrogate: feature dimension must be in [1, D]");
  }
  const ParamLayout layout = ParamLayout::make(X_.cols(), feature_dim_, structure_, opts_);
  y_mean_cache_ = y_.mean();
  const double var = (y_.array() - y_mean_cache_).square().mean();
  y_scale_cache_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  const Eigen::VectorXd y_std = (y_.array() - y_mean_cache_) / y_scale_cache_;
  const Eigen::MatrixXd X_warped = warp_inputs(X_, opts_.warp_clip);
  state_ = build_state(params_, X_, y_std, X_warped, layout, structure_, opts_);
  if (!state_->ok) {
    throw NumericalError("JointSurrogate: covariance factorization failed for these parameters");
  }
}

PosteriorGaussian JointSurrogate::response_posterior(
    const Eigen::Ref<const Eigen::VectorXd>& x_star) const {
  return response_posterior_z(encode_point(x_star));
}

PosteriorGaussian JointSurrogate::response_posterior_z(
    const Eigen::Ref<const Eigen::VectorXd>& z_star) const {
  const auto& st = *state_;
  const Eigen::VectorXd k_vec = kernel_vector(st.resp_kernel, st.enc.Z, z_star);
  const double mu_std = k_vec.dot(st.alpha_y);
  const Eigen::VectorXd v = st.Ky_llt.solve(k_vec);
  const double var_std = std::max(0.0, st.resp_kernel.signal_variance() - k_vec.dot(v));
  PosteriorGaussian out;
  out.mean = y_mean_cache_ + y_scale_cache_ * mu_std;
  out.variance = y_scale_cache_ * y_scale_cache_ * var_std;
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> JointSurrogate::decoder_posterior(
    const Eigen::Ref<const Eigen::VectorXd>& z_star) const {
  const auto& st = *state_;
  const Eigen::Index D = X_.cols();
  Eigen::VectorXd mean(D), var(D);
  for (const auto& blk : st.blocks) {
    const auto& kc = st.dec_kernels[blk.kernel];
    const Eigen::VectorXd k_vec = kernel_vector(kc.params, st.enc.Z, z_star);
    mean.segment(blk.offset, blk.size) = blk.M * k_vec;

    const Eigen::VectorXd kappa_sq = (kc.Qk.transpose() * k_vec).array().square();
    const double prior = kc.params.signal_variance();
    // inner_p = sum_q kappa_q^2 / (lb_p lk_q + s2); then
    // q_i = sum_p (Qb^T B)(p,i)^2 inner_p
    Eigen::VectorXd inner(blk.size);
    for (Eigen::Index p = 0; p < blk.size; ++p) {
      inner[p] =
          (kappa_sq.array() / (blk.lb[p] * kc.lk.array() + st.dec_noise_variance)).sum();
    }
    for (Eigen::Index i = 0; i < blk.size; ++i) {
      const double q_i = blk.QbtB.col(i).array().square().matrix().dot(inner);
      var[blk.offset + i] = std::max(0.0, blk.B(i, i) * prior - q_i);
    }
  }
  return {std::move(mean), std::move(var)};
}

Eigen::VectorXd JointSurrogate::decoder_posterior_mean(
    const Eigen::Ref<const Eigen::VectorXd>& z_star) const {
  const auto& st = *state_;
  Eigen::VectorXd mean(X_.cols());
  for (const auto& blk : st.blocks) {
    const auto& kc = st.dec_kernels[blk.kernel];
    mean.segment(blk.offset, blk.size) = blk.M * kernel_vector(kc.params, st.enc.Z, z_star);
  }
  return mean;
}

Eigen::MatrixXd JointSurrogate::decoder_mean_jacobian(
    const Eigen::Ref<const Eigen::VectorXd>& z_star) const {
  const auto& st = *state_;
  Eigen::MatrixXd J(X_.cols(), feature_dim_);
  for (const auto& blk : st.blocks) {
    const auto& kc = st.dec_kernels[blk.kernel];
    J.middleRows(blk.offset, blk.size) =
        blk.M * kernel_vector_jacobian(kc.params, st.enc.Z, z_star);
  }
  return J;
}

Eigen::VectorXd JointSurrogate::reconstruct(const Eigen::Ref<const Eigen::VectorXd>& z_star) const {
  auto [mean, var] = decoder_posterior(z_star);
  Eigen::VectorXd x(mean.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = norm_cdf(mean[i] / std::sqrt(1.0 + var[i]));
    x[i] = std::min(1.0, std::max(0.0, x[i]));
  }
  return x;
}

Eigen::VectorXd JointSurrogate::encode_point(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != X_.cols()) {
    throw std::invalid_argument("encode_point: dimension mismatch");
  }
  return encode(state_->encoder, x.transpose()).row(0);
}

const Eigen::MatrixXd& JointSurrogate::embedded_training() const { return state_->enc.Z; }

double JointSurrogate::noise_variance() const { return state_->noise_variance; }

double JointSurrogate::decoder_noise_variance() const { return state_->dec_noise_variance; }

std::string JointSurrogate::to_json() const {
  nlohmann::json j;
  j["format"] = "featbo-surrogate-v1";
  j["input_dim"] = X_.cols();
  j["feature_dim"] = feature_dim_;
  j["hidden_dim"] = opts_.hidden_dim;
  j["kernel"] = kernel_kind_name(opts_.kernel);
  j["decoder"] = {{"variant", variant_name(structure_.variant)},
                  {"block_size", structure_.block_size},
                  {"latent_count", structure_.latent_count}};
  j["noise_variance"] = opts_.noise_variance;
  j["learn_noise"] = opts_.learn_noise;
  j["separate_decoder_noise"] = opts_.separate_decoder_noise;
  j["decoder_noise_variance"] = opts_.decoder_noise_variance;
  j["learn_decoder_noise"] = opts_.learn_decoder_noise;
  j["decoder_lengthscale_floor"] = opts_.decoder_lengthscale_floor;
  j["warp_clip"] = opts_.warp_clip;
  j["jitter_scale"] = opts_.jitter_scale;
  j["degraded"] = report_.degraded;
  j["params"] = std::vector<double>(params_.data(), params_.data() + params_.size());
  j["y"] = std::vector<double>(y_.data(), y_.data() + y_.size());
  std::vector<std::vector<double>> rows(X_.rows());
  for (Eigen::Index r = 0; r < X_.rows(); ++r) {
    rows[r].assign(X_.row(r).begin(), X_.row(r).end());
  }
  j["X"] = rows;
  return j.dump(2);
}

JointSurrogate JointSurrogate::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != std::string("featbo-surrogate-v1")) {
    throw std::invalid_argument("surrogate checkpoint: unrecognized format tag");
  }
  ModelOptions opts;
  opts.hidden_dim = j.at("hidden_dim").get<int>();
  opts.kernel = kernel_kind_from_name(j.at("kernel").get<std::string>());
  opts.noise_variance = j.at("noise_variance").get<double>();
  opts.learn_noise = j.at("learn_noise").get<bool>();
  opts.separate_decoder_noise = j.value("separate_decoder_noise", false);
  opts.decoder_noise_variance = j.value("decoder_noise_variance", 1e-2);
  opts.learn_decoder_noise = j.value("learn_decoder_noise", true);
  opts.decoder_lengthscale_floor = j.value("decoder_lengthscale_floor", 0.0);
  opts.warp_clip = j.at("warp_clip").get<double>();
  opts.jitter_scale = j.at("jitter_scale").get<double>();
  DecoderStructure structure;
  structure.variant = variant_from_name(j.at("decoder").at("variant").get<std::string>());
  structure.block_size = j.at("decoder").at("block_size").get<int>();
  structure.latent_count = j.at("decoder").at("latent_count").get<int>();

  const auto pv = j.at("params").get<std::vector<double>>();
  const auto yv = j.at("y").get<std::vector<double>>();
  const auto xr = j.at("X").get<std::vector<std::vector<double>>>();
  const Eigen::Index n = static_cast<Eigen::Index>(xr.size());
  const Eigen::Index d_in = n > 0 ? static_cast<Eigen::Index>(xr[0].size()) : 0;
  Eigen::MatrixXd X(n, d_in);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(xr[r].size()) != d_in) {
      throw std::invalid_argument("surrogate checkpoint: ragged X rows");
    }
    for (Eigen::Index c = 0; c < d_in; ++c) X(r, c) = xr[r][c];
  }
  JointSurrogate s(Eigen::Map<const Eigen::VectorXd>(pv.data(), static_cast<Eigen::Index>(pv.size())),
                   std::move(X),
                   Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size())),
                   j.at("feature_dim").get<Eigen::Index>(), structure, opts);
  FitReport rep;
  rep.degraded = j.value("degraded", false);
  s.set_fit_report(rep);
  return s;
}

JointSurrogate fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index feature_dim,
                   const DecoderStructure& structure, const ModelOptions& opts, const FitConfig& cfg,
                   const std::optional<Eigen::VectorXd>& warm_start) {
  JointObjective obj(X, y, feature_dim, structure, opts);
  const BoxBounds bounds = obj.bounds();
  const GradObjective gobj = [&obj](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    return obj.value_and_gradient(p, g);
  };
  Rng rng(cfg.seed);

  FitReport report;
  Eigen::VectorXd best_params;
  double best_value = kInf;
  const int restarts = std::max(1, cfg.restarts);
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd p0;
    if (r == 0 && warm_start.has_value()) {
      p0 = bounds.clamp(*warm_start);
    } else {
      Rng child = rng.child(static_cast<std::uint64_t>(r));
      p0 = obj.initial_params(child);
    }
    OptimResult res = minimize_box(gobj, p0, bounds, cfg.optimizer);

    RestartReport rr;
    rr.initial_value = res.trace.empty() ? obj.value(p0) : res.trace.front();
    rr.final_value = res.f_opt;
    rr.converged = res.converged;
    rr.trace = res.trace;
    report.restarts.push_back(std::move(rr));

    if (std::isfinite(res.f_opt) && res.f_opt < best_value) {
      best_value = res.f_opt;
      best_params = res.x_opt;
      report.best_restart = r;
    }
  }

  if (!std::isfinite(best_value)) {
    // Every restart failed numerically; fall back to a fresh initialization
    // so callers still get a usable (if poor) model, flagged degraded.
    Rng child = rng.child(0);
    best_params = obj.initial_params(child);
    report.degraded = true;
  }

  JointSurrogate s(std::move(best_params), X, y, feature_dim, structure, opts);
  s.set_fit_report(report);
  return s;
}

}  // namespace featbo
