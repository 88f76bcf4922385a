#pragma once

#include "asfem/fem.hpp"
#include "asfem/krylov.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace asfem {

enum class LocalSolverKind {
  exact,         ///< S_k = A_k^{-1} by dense Cholesky
  scaled_jacobi, ///< S_k = omega diag(A_k)^{-1}
};

struct LocalSolverOptions {
  LocalSolverKind kind = LocalSolverKind::exact;
  double omega = 1.0;
};

/// A subspace V_k given by its embedding into the fine space: the columns of
/// `embedding` are coefficient vectors over the fine indices listed in `rows`.
/// An empty embedding means plain selection of `rows`.
struct PatchSpace {
  int id = -1;
  std::vector<int> rows;
  Eigen::MatrixXd embedding;
};

/// Coarse block: fine x coarse embedding matrix I_h.
struct CoarseSpace {
  SparseOperator embedding;
};

/// Additive Schwarz splitting of a fine SPD operator A into an optional coarse
/// block and local blocks, S = sum_k I_k S_k Q_k and B = S + I_h A_h^{-1} Q_h.
/// Q_k = I_k^T in coordinates; A_k = I_k^T A I_k and A_h = I_h^T A I_h.
class SubspaceDecomposition {
public:
  struct Block {
    int id = -1;
    std::vector<int> rows;
    Eigen::MatrixXd embedding; // empty for selection
    Eigen::MatrixXd local_operator;
    Eigen::LLT<Eigen::MatrixXd> factor;
    Eigen::VectorXd jacobi; // omega / diag(A_k), scaled_jacobi only

    int dimension() const { return static_cast<int>(local_operator.rows()); }
  };

  SubspaceDecomposition(SparseOperator a, std::vector<PatchSpace> patches, std::optional<CoarseSpace> coarse,
                        LocalSolverOptions solver = {});

  int dimension() const { return static_cast<int>(a_.rows()); }
  const SparseOperator& fine_operator() const { return a_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const Block& block(int k) const { return blocks_[static_cast<std::size_t>(k)]; }
  bool has_coarse() const { return coarse_.has_value(); }
  const SparseOperator& coarse_embedding() const { return coarse_->embedding; }
  const SparseOperator& coarse_operator() const { return coarse_operator_; }
  const LocalSolverOptions& local_solver() const { return solver_; }

  /// Patches with no degrees of freedom that were dropped during construction.
  int dropped_patches() const { return dropped_; }
  /// M = max_k #{j : A couples V_j and V_k}, k counted in its own set.
  int max_overlap() const { return max_overlap_; }
  /// Spectral equivalence constants of S_k against A_k^{-1} over all blocks.
  double gamma_lower() const { return gamma_lower_; }
  double gamma_upper() const { return gamma_upper_; }

  Eigen::VectorXd local_solve(int k, const Eigen::VectorXd& rhs) const;
  /// Dense S_k^{-1}.
  Eigen::MatrixXd local_solver_inverse(int k) const;

  Eigen::VectorXd apply_smoother(const Eigen::VectorXd& r) const;
  Eigen::VectorXd apply_coarse(const Eigen::VectorXd& r) const;
  Eigen::VectorXd apply_preconditioner(const Eigen::VectorXd& r) const;
  /// <Q_k r, S_k Q_k r> per block, in block order.
  std::vector<double> block_energies(const Eigen::VectorXd& r) const;

private:
  SparseOperator a_;
  std::vector<Block> blocks_;
  std::optional<CoarseSpace> coarse_;
  SparseOperator coarse_operator_;
  std::unique_ptr<Eigen::SimplicialLDLT<SparseOperator>> coarse_factor_;
  LocalSolverOptions solver_;
  int dropped_ = 0;
  int max_overlap_ = 0;
  double gamma_lower_ = 1.0;
  double gamma_upper_ = 1.0;
};

/// Fine-space unknowns whose basis function vanishes outside each vertex patch
/// Omega_k, one PatchSpace per vertex (possibly empty).
std::vector<PatchSpace> vertex_patch_spaces(const FeSpace& space);

/// Deployment as a solver preconditioner: coarse block = `coarse` interpolated
/// into `fine`, local blocks = vertex patches of the fine space.
SubspaceDecomposition two_level_decomposition(const FeSpace& fine, const FeSpace& coarse,
                                              std::span<const int> fine_to_coarse, const SparseOperator& a,
                                              LocalSolverOptions solver = {});

/// One-level decomposition over vertex patches only.
SubspaceDecomposition one_level_decomposition(const FeSpace& space, const SparseOperator& a,
                                              LocalSolverOptions solver = {});

/// PCG on A x = b preconditioned with B of the decomposition.
PcgResult pcg_solve(const SparseOperator& a, const Eigen::VectorXd& b, const SubspaceDecomposition& d,
                    double rel_tol, int max_iterations,
                    const std::function<void(int, const Eigen::VectorXd&)>& on_iterate = {});

enum class SpectralMethod { dense_eig, lanczos };

inline constexpr int kDenseEigCap = 2000;
inline constexpr int kIdentityCap = 200;
inline constexpr int kLanczosIterations = 200;

/// Empirical constants of the spectral equivalence between B and A^{-1}.
struct VerificationReport {
  int level = 0;
  int ndof = 0;
  double lambda_min = std::numeric_limits<double>::quiet_NaN();
  double lambda_max = std::numeric_limits<double>::quiet_NaN();
  double cond = std::numeric_limits<double>::quiet_NaN();
  double identity_err = std::numeric_limits<double>::quiet_NaN();
  int lanczos_steps = 0;
};

/// Extreme eigenvalues of BA. dense_eig requires dimension <= kDenseEigCap;
/// lanczos runs kLanczosIterations steps in the A inner product with full
/// reorthogonalization from the normalized all-ones vector.
VerificationReport spectral_bounds(const SparseOperator& a, const SubspaceDecomposition& d, SpectralMethod method);

/// Picks dense_eig up to kDenseEigCap unknowns and lanczos above.
VerificationReport spectral_bounds(const SparseOperator& a, const SubspaceDecomposition& d);

/// Largest relative gap, over the trial vectors, between <B^{-1} v, v> from a
/// dense inverse of B and the infimum of <A_h v_h, v_h> + sum <S_k^{-1} v_k, v_k>
/// over splittings v = I_h v_h + sum I_k v_k, computed from the KKT system of
/// that constrained minimization. Requires dimension <= kIdentityCap.
double verify_decomposition_identity(const SubspaceDecomposition& d, std::span<const Eigen::VectorXd> trials);

void write_verification_csv(std::ostream& out, std::span<const VerificationReport> reports);

} // namespace asfem
