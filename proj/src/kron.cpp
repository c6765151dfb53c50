#include "featbo/kron.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace featbo::kron {

namespace {

// r <- (M_1 kron ... kron M_W) r, optionally applying each factor transposed.
// The loop runs l = W..1: reshape the running vector into [G_l x N_V/G_l]
// column-major, left-multiply by M_l, then flatten the transpose. After all
// factors, indices return to their original significance order.
void apply_in_place(const std::vector<Eigen::MatrixXd>& mats, Eigen::VectorXd& r,
                    Eigen::VectorXd& scratch, bool transposed) {
  const Eigen::Index n = r.size();
  for (auto it = mats.rbegin(); it != mats.rend(); ++it) {
    const Eigen::Index g = it->rows();
    const Eigen::Index m = n / g;
    Eigen::Map<const Eigen::MatrixXd> in(r.data(), g, m);
    Eigen::Map<Eigen::MatrixXd> out(scratch.data(), m, g);  // holds (M_l * in)^T
    if (transposed) {
      out.noalias() = in.transpose() * (*it);
    } else {
      out.noalias() = in.transpose() * it->transpose();
    }
    r.swap(scratch);
  }
}

void check_length(Eigen::Index expected, Eigen::Index got, const char* op) {
  if (expected != got) {
    throw std::invalid_argument(std::string(op) + ": vector length " + std::to_string(got) +
                                " does not match Kronecker side " + std::to_string(expected));
  }
}

}  // namespace

KronFactors::KronFactors(std::vector<Eigen::MatrixXd> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) {
    throw std::invalid_argument("KronFactors: at least one factor required");
  }
  for (auto& f : factors_) {
    if (f.rows() != f.cols() || f.rows() == 0) {
      throw std::invalid_argument("KronFactors: factors must be square and nonempty");
    }
    const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
    const double asym = (f - f.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
      throw std::invalid_argument("KronFactors: factor is not symmetric within tolerance (|K - K^T| = " +
                                  std::to_string(asym) + ")");
    }
    f = 0.5 * (f + f.transpose()).eval();
    full_side_ *= f.rows();
  }
}

Eigen::Index KronEig::full_side() const {
  Eigen::Index n = 1;
  for (const auto& v : eigval_factors) n *= v.size();
  return n;
}

NoisyKron::NoisyKron(KronEig eig, double noise_variance)
    : eig_(std::move(eig)), noise_variance_(noise_variance) {
  if (!(noise_variance_ > 0.0)) {
    throw std::invalid_argument("NoisyKron: noise variance must be strictly positive");
  }
}

Eigen::VectorXd matvec(const KronFactors& factors, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_length(factors.full_side(), x.size(), "kron matvec");
  Eigen::VectorXd r = x;
  Eigen::VectorXd scratch(x.size());
  apply_in_place(factors.factors(), r, scratch, /*transposed=*/false);
  return r;
}

KronEig eig(const KronFactors& factors) {
  KronEig out;
  out.eigvec_factors.reserve(factors.count());
  out.eigval_factors.reserve(factors.count());
  for (const auto& f : factors.factors()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f);
    if (es.info() != Eigen::Success) {
      throw std::invalid_argument("kron eig: eigendecomposition failed to converge");
    }
    out.eigvec_factors.push_back(es.eigenvectors());
    out.eigval_factors.push_back(es.eigenvalues().cwiseMax(0.0));
  }
  return out;
}

Eigen::VectorXd solve_noisy(const NoisyKron& nk, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto& ke = nk.eig();
  check_length(ke.full_side(), x.size(), "kron solve");

  Eigen::VectorXd r = x;
  Eigen::VectorXd scratch(x.size());
  apply_in_place(ke.eigvec_factors, r, scratch, /*transposed=*/true);  // s = Q^T x

  // Divide by the diagonal (Lambda_kron + s2), streaming the eigenvalue
  // products in Kronecker index order instead of materializing them.
  const double s2 = nk.noise_variance();
  const std::size_t w = ke.eigval_factors.size();
  std::vector<Eigen::Index> idx(w, 0);
  std::vector<double> prod(w + 1);
  prod[0] = 1.0;
  for (std::size_t l = 0; l < w; ++l) prod[l + 1] = prod[l] * ke.eigval_factors[l][0];
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    r[i] /= prod[w] + s2;
    // advance the mixed-radix counter (last factor is least significant)
    for (std::size_t l = w; l-- > 0;) {
      if (++idx[l] < ke.eigval_factors[l].size()) {
        for (std::size_t m = l; m < w; ++m) prod[m + 1] = prod[m] * ke.eigval_factors[m][idx[m]];
        break;
      }
      idx[l] = 0;
    }
  }

  apply_in_place(ke.eigvec_factors, r, scratch, /*transposed=*/false);  // Q w
  return r;
}

double logdet_noisy(const NoisyKron& nk) {
  const auto& ke = nk.eig();
  const double s2 = nk.noise_variance();
  const std::size_t w = ke.eigval_factors.size();
  double acc = 0.0;
  std::vector<Eigen::Index> idx(w, 0);
  std::vector<double> prod(w + 1);
  prod[0] = 1.0;
  for (std::size_t l = 0; l < w; ++l) prod[l + 1] = prod[l] * ke.eigval_factors[l][0];
  const Eigen::Index n = ke.full_side();
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += std::log(prod[w] + s2);
    for (std::size_t l = w; l-- > 0;) {
      if (++idx[l] < ke.eigval_factors[l].size()) {
        for (std::size_t m = l; m < w; ++m) prod[m + 1] = prod[m] * ke.eigval_factors[m][idx[m]];
        break;
      }
      idx[l] = 0;
    }
  }
  return acc;
}

double quadform(const NoisyKron& nk, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.dot(solve_noisy(nk, x));
}

}  // namespace featbo::kron
