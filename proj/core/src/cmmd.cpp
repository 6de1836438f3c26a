#include "kln/cmmd.hpp"

#include <string>

#include "kln/error.hpp"

namespace kln {

namespace {

Mat ridge(const Mat& k, double lambda) {
  Mat out = k;
  out.diagonal().array() += lambda;
  return out;
}

void expect_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string("gram pack: ") + name + " is " + shape_of(m) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

void GramPack::validate(bool check_psd) const {
  if (!(lambda > 0.0)) throw NumericError("gram pack: lambda must be positive");
  const Eigen::Index ns = k_s.rows();
  const Eigen::Index nt = k_t.rows();
  if (ns == 0 || nt == 0) throw DimensionError("gram pack: empty batch");
  expect_shape(k_s, ns, ns, "k_s");
  expect_shape(k_t, nt, nt, "k_t");
  expect_shape(k_ts, nt, ns, "k_ts");
  expect_shape(l_s, ns, ns, "l_s");
  expect_shape(l_t, nt, nt, "l_t");
  expect_shape(l_st, ns, nt, "l_st");
  for (const Mat* m : {&k_s, &k_t, &k_ts, &l_s, &l_t, &l_st}) {
    require_finite(*m, "gram pack");
  }
  for (const Mat* m : {&k_s, &k_t, &l_s, &l_t}) {
    if (max_asymmetry(*m) > 1e-10) throw DimensionError("gram pack: Gram is not symmetric");
  }
  if (check_psd) {
    for (const Mat* m : {&k_s, &k_t}) {
      if (min_eigenvalue_estimate(*m) < -1e-8) {
        throw NumericError("gram pack: data Gram is not positive semi-definite");
      }
    }
  }
}

GramPack make_gram_pack(const KernelSpec& data_kernel, const KernelSpec& label_kernel,
                        const Mat& z_s, const Mat& y_s, const Mat& z_t, const Mat& y_t,
                        double lambda) {
  if (z_s.rows() != y_s.rows() || z_t.rows() != y_t.rows()) {
    throw DimensionError("make_gram_pack: sample and label counts differ");
  }
  GramPack pack;
  pack.k_s = gram(data_kernel, z_s, z_s);
  pack.k_t = gram(data_kernel, z_t, z_t);
  pack.k_ts = gram(data_kernel, z_t, z_s);
  pack.l_s = gram(label_kernel, y_s, y_s);
  pack.l_t = gram(label_kernel, y_t, y_t);
  pack.l_st = gram(label_kernel, y_s, y_t);
  pack.lambda = lambda;
  return pack;
}

CmmdValue cmmd_value(const GramPack& pack) {
  pack.validate();
  const Cholesky chol_s(ridge(pack.k_s, pack.lambda));
  const Cholesky chol_t(ridge(pack.k_t, pack.lambda));

  // Self terms: Tr(K A L A) = Tr(H L) with H = A K A.
  const Mat h_s = chol_s.solve(chol_s.solve(pack.k_s).transpose());
  const Mat h_t = chol_t.solve(chol_t.solve(pack.k_t).transpose());

  // Cross term: Tr(K_ts A_s L_st A_t) = Tr(R L_st) with R = A_t K_ts A_s.
  // L_st is n_s x n_t (Psi_s^T Psi_t); the explicit-operator oracle agrees
  // with this orientation, not with L_ts.
  const Mat r = chol_t.solve(chol_s.solve(pack.k_ts.transpose()).transpose());

  CmmdValue v;
  v.term_s = trace_of_product(h_s, pack.l_s);
  v.term_t = trace_of_product(h_t, pack.l_t);
  v.cross_term = trace_of_product(r, pack.l_st);
  v.total = v.term_s + v.term_t - 2.0 * v.cross_term;
  return v;
}

double cmmd_oracle(const Mat& phi_s, const Mat& psi_s, const Mat& phi_t, const Mat& psi_t,
                   double lambda) {
  if (phi_s.rows() != psi_s.rows() || phi_t.rows() != psi_t.rows()) {
    throw DimensionError("cmmd_oracle: feature and label sample counts differ");
  }
  if (phi_s.cols() != phi_t.cols() || psi_s.cols() != psi_t.cols()) {
    throw DimensionError("cmmd_oracle: feature widths differ between s and t");
  }
  if (!(lambda > 0.0)) throw NumericError("cmmd_oracle: lambda must be positive");
  auto op = [lambda](const Mat& phi, const Mat& psi) -> Mat {
    const Eigen::Index n = phi.rows();
    const Mat reg = phi * phi.transpose() + lambda * Mat::Identity(n, n);
    const Mat weights = reg.fullPivLu().solve(phi);
    return psi.transpose() * weights;
  };
  return (op(phi_s, psi_s) - op(phi_t, psi_t)).squaredNorm();
}

Mat h_matrix(const Mat& k, double lambda) {
  if (!(lambda > 0.0)) throw NumericError("h_matrix: lambda must be positive");
  const Cholesky chol(ridge(k, lambda));
  const Mat h = chol.solve(chol.solve(k).transpose());
  return 0.5 * (h + h.transpose());
}

GramPackGrads cmmd_pack_backward(const GramPack& pack, double upstream) {
  pack.validate();
  const Cholesky chol_s(ridge(pack.k_s, pack.lambda));
  const Cholesky chol_t(ridge(pack.k_t, pack.lambda));

  GramPackGrads g;

  // d Tr(K A L A)/dK = P - X - X^T with P = A L A, X = A K P.
  auto self_term = [](const Cholesky& chol, const Mat& k, const Mat& l, Mat& gk, Mat& gl) {
    const Mat p = chol.solve(chol.solve(l).transpose());
    const Mat x = chol.solve(k * p);
    gk = p - x - x.transpose();
    gl = chol.solve(chol.solve(k).transpose());
  };
  self_term(chol_s, pack.k_s, pack.l_s, g.k_s, g.l_s);
  self_term(chol_t, pack.k_t, pack.l_t, g.k_t, g.l_t);

  // Cross term C = Tr(K_ts A_s L_st A_t), entering with weight -2.
  const Mat r = chol_t.solve(chol_s.solve(pack.k_ts.transpose()).transpose());
  const Mat gk_ts = chol_t.solve(chol_s.solve(pack.l_st).transpose());
  const Mat gk_s = -chol_s.solve(pack.l_st * r).transpose();
  const Mat gk_t = -chol_t.solve(pack.l_st.transpose() * r.transpose());

  g.k_ts = -2.0 * gk_ts;
  g.l_st = -2.0 * r.transpose();
  g.k_s += -2.0 * gk_s;
  g.k_t += -2.0 * gk_t;

  for (Mat* m : {&g.k_s, &g.k_t, &g.k_ts, &g.l_s, &g.l_t, &g.l_st}) *m *= upstream;
  return g;
}

CmmdTape::CmmdTape(KernelSpec data_kernel, KernelSpec label_kernel, double lambda)
    : data_kernel_(std::move(data_kernel)), label_kernel_(std::move(label_kernel)), lambda_(lambda) {
  data_kernel_.validate();
  label_kernel_.validate();
  if (!(lambda_ > 0.0)) throw NumericError("cmmd: lambda must be positive");
}

CmmdValue CmmdTape::forward(const Mat& z_s, const Mat& y_s, const Mat& z_t, const Mat& y_t) {
  State st{z_s, y_s, z_t, y_t,
           make_gram_pack(data_kernel_, label_kernel_, z_s, y_s, z_t, y_t, lambda_)};
  const CmmdValue v = cmmd_value(st.pack);
  state_ = std::move(st);
  return v;
}

const GramPack& CmmdTape::pack() const {
  if (!state_) throw StateError("cmmd: no forward pass retained");
  return state_->pack;
}

CmmdGrads CmmdTape::backward(double upstream) const {
  if (!state_) throw StateError("cmmd: backward without forward");
  const State& st = *state_;
  const GramPackGrads gp = cmmd_pack_backward(st.pack, upstream);

  CmmdGrads out;
  {
    auto [a, b] = gram_backward(data_kernel_, st.z_s, st.z_s, gp.k_s);
    out.latent_s = a + b;
  }
  {
    auto [a, b] = gram_backward(data_kernel_, st.z_t, st.z_t, gp.k_t);
    out.latent_t = a + b;
  }
  {
    auto [gt, gs] = gram_backward(data_kernel_, st.z_t, st.z_s, gp.k_ts);
    out.latent_t += gt;
    out.latent_s += gs;
  }
  {
    auto [a, b] = gram_backward(label_kernel_, st.y_s, st.y_s, gp.l_s);
    out.labels_s = a + b;
  }
  {
    auto [a, b] = gram_backward(label_kernel_, st.y_t, st.y_t, gp.l_t);
    out.labels_t = a + b;
  }
  {
    auto [gs, gt] = gram_backward(label_kernel_, st.y_s, st.y_t, gp.l_st);
    out.labels_s += gs;
    out.labels_t += gt;
  }
  return out;
}

Mat CmmdTape::backward(double upstream, CmmdLeaf wrt) const {
  CmmdGrads g = backward(upstream);
  switch (wrt) {
    case CmmdLeaf::LatentS: return std::move(g.latent_s);
    case CmmdLeaf::LatentT: return std::move(g.latent_t);
    case CmmdLeaf::LabelsS: return std::move(g.labels_s);
    case CmmdLeaf::PredictedLabels: return std::move(g.labels_t);
  }
  throw StateError("cmmd: unknown leaf");
}

}  // namespace kln
