#pragma once

#include <optional>

#include "kln/kernels.hpp"
#include "kln/linalg.hpp"

namespace kln {

/// The six Gram matrices of the empirical CMMD plus its ridge.
///
/// k_ts is n_t x n_s (t rows, s columns); l_st is n_s x n_t.
struct GramPack {
  Mat k_s, k_t, k_ts;
  Mat l_s, l_t, l_st;
  double lambda = 0.1;

  /// Shapes, symmetry (1e-10), finiteness and lambda > 0. With check_psd the
  /// data-side Grams must also have min eigenvalue >= -1e-8.
  void validate(bool check_psd = false) const;
};

struct CmmdValue {
  double term_s = 0.0;
  double term_t = 0.0;
  double cross_term = 0.0;
  double total = 0.0;
};

/// Builds the pack from latent codes and label vectors of both batches.
GramPack make_gram_pack(const KernelSpec& data_kernel, const KernelSpec& label_kernel,
                        const Mat& z_s, const Mat& y_s, const Mat& z_t, const Mat& y_t,
                        double lambda);

/// Tr(K_s A_s L_s A_s) + Tr(K_t A_t L_t A_t) - 2 Tr(K_ts A_s L_st A_t), with
/// A = (K + lambda I)^{-1} applied through Cholesky solves.
CmmdValue cmmd_value(const GramPack& pack);

/// |C_s - C_t|_F^2 with C = Psi^T (Phi Phi^T + lambda I)^{-1} Phi formed
/// explicitly from finite feature matrices (features as rows). Uses an LU
/// solve so it shares no code path with cmmd_value.
double cmmd_oracle(const Mat& phi_s, const Mat& psi_s, const Mat& phi_t, const Mat& psi_t,
                   double lambda);

/// H = (K + lambda I)^{-1} K (K + lambda I)^{-1}, the weight applied to the
/// label Gram inside each self term.
Mat h_matrix(const Mat& k, double lambda);

/// dL/d(each Gram) for L = upstream * cmmd_value(pack).total.
struct GramPackGrads {
  Mat k_s, k_t, k_ts;
  Mat l_s, l_t, l_st;
};
GramPackGrads cmmd_pack_backward(const GramPack& pack, double upstream);

enum class CmmdLeaf { LatentS, LatentT, LabelsS, PredictedLabels };

struct CmmdGrads {
  Mat latent_s, latent_t;
  Mat labels_s, labels_t;
};

/// Forward/backward of the CMMD loss on latent codes and label vectors.
///
/// forward() keeps the inputs and Gram pack; backward() chains the pack
/// adjoints through both kernels. The tape belongs to a single minibatch.
class CmmdTape {
 public:
  CmmdTape(KernelSpec data_kernel, KernelSpec label_kernel, double lambda);

  CmmdValue forward(const Mat& z_s, const Mat& y_s, const Mat& z_t, const Mat& y_t);

  /// Throws StateError when no forward pass is held.
  CmmdGrads backward(double upstream = 1.0) const;
  Mat backward(double upstream, CmmdLeaf wrt) const;

  bool has_forward() const { return state_.has_value(); }
  const GramPack& pack() const;
  void reset() { state_.reset(); }

 private:
  struct State {
    Mat z_s, y_s, z_t, y_t;
    GramPack pack;
  };
  KernelSpec data_kernel_;
  KernelSpec label_kernel_;
  double lambda_;
  std::optional<State> state_;
};

}  // namespace kln
