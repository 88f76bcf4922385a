#include "asfem/schwarz.hpp"

#include "asfem/error.hpp"
#include "asfem/lagrange.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace asfem {

namespace {

Eigen::MatrixXd principal_block(const SparseOperator& a, const std::vector<int>& rows, std::vector<int>& position) {
  const int m = static_cast<int>(rows.size());
  for (int i = 0; i < m; ++i) position[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])] = i;
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    for (SparseOperator::InnerIterator it(a, rows[static_cast<std::size_t>(j)]); it; ++it) {
      const int i = position[static_cast<std::size_t>(it.row())];
      if (i >= 0) block(i, j) = it.value();
    }
  }
  for (int r : rows) position[static_cast<std::size_t>(r)] = -1;
  return block;
}

void check_dimension(const SubspaceDecomposition& d, const Eigen::VectorXd& r) {
  if (r.size() != d.dimension())
    throw InvalidArgument(fmt::format("dimension mismatch: vector of size {} for a space of dimension {}", r.size(),
                                      d.dimension()));
}

} // namespace

SubspaceDecomposition::SubspaceDecomposition(SparseOperator a, std::vector<PatchSpace> patches,
                                             std::optional<CoarseSpace> coarse, LocalSolverOptions solver)
    : a_(std::move(a)), coarse_(std::move(coarse)), solver_(solver) {
  a_.makeCompressed();
  const int n = static_cast<int>(a_.rows());
  if (a_.cols() != n) throw InvalidArgument("decomposition: operator is not square");
  if (solver_.kind == LocalSolverKind::scaled_jacobi && !(solver_.omega > 0.0))
    throw InvalidArgument("decomposition: jacobi scaling must be positive");

  if (coarse_) {
    const SparseOperator& p = coarse_->embedding;
    if (p.rows() != n) throw InvalidArgument("decomposition: coarse embedding has the wrong number of rows");
    coarse_operator_ = SparseOperator(p.transpose() * a_ * p);
    coarse_operator_.makeCompressed();
    if (coarse_operator_.rows() > 0) {
      coarse_factor_ = std::make_unique<Eigen::SimplicialLDLT<SparseOperator>>(coarse_operator_);
      if (coarse_factor_->info() != Eigen::Success || (coarse_factor_->vectorD().array() <= 0.0).any())
        throw SolverError("decomposition: coarse operator is not positive definite");
    }
  }

  std::vector<int> position(static_cast<std::size_t>(n), -1);
  gamma_lower_ = 1.0;
  gamma_upper_ = 1.0;
  bool first_gamma = true;
  for (PatchSpace& patch : patches) {
    const bool selection = patch.embedding.size() == 0;
    if (patch.rows.empty() || (!selection && patch.embedding.cols() == 0)) {
      ++dropped_;
      continue;
    }
    for (int r : patch.rows)
      if (r < 0 || r >= n) throw InvalidArgument(fmt::format("decomposition: patch {} has row {} out of range", patch.id, r));
    if (!selection && patch.embedding.rows() != static_cast<Eigen::Index>(patch.rows.size()))
      throw InvalidArgument(fmt::format("decomposition: patch {} embedding does not match its rows", patch.id));

    Block b;
    b.id = patch.id;
    b.rows = std::move(patch.rows);
    b.embedding = std::move(patch.embedding);
    const Eigen::MatrixXd local = principal_block(a_, b.rows, position);
    b.local_operator = selection ? local : Eigen::MatrixXd(b.embedding.transpose() * local * b.embedding);
    b.local_operator = 0.5 * (b.local_operator + b.local_operator.transpose()).eval();
    b.factor.compute(b.local_operator);
    if (b.factor.info() != Eigen::Success)
      throw SolverError(fmt::format("decomposition: local operator of patch {} is singular", b.id));
    if (solver_.kind == LocalSolverKind::scaled_jacobi) {
      const Eigen::VectorXd diag = b.local_operator.diagonal();
      b.jacobi = solver_.omega * diag.cwiseInverse();
      // generalized eigenvalues of S_k A_k
      const Eigen::VectorXd s = b.jacobi.cwiseSqrt();
      const Eigen::MatrixXd scaled = s.asDiagonal() * b.local_operator * s.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      gamma_lower_ = first_gamma ? lo : std::min(gamma_lower_, lo);
      gamma_upper_ = first_gamma ? hi : std::max(gamma_upper_, hi);
      first_gamma = false;
    }
    blocks_.push_back(std::move(b));
  }

  // overlap: blocks j coupled to block k through a nonzero of A
  std::vector<int> offsets(static_cast<std::size_t>(n) + 1, 0);
  for (const Block& b : blocks_)
    for (int r : b.rows) ++offsets[static_cast<std::size_t>(r) + 1];
  for (int i = 0; i < n; ++i) offsets[static_cast<std::size_t>(i) + 1] += offsets[static_cast<std::size_t>(i)];
  std::vector<int> owners(static_cast<std::size_t>(offsets.back()));
  std::vector<int> fill(offsets.begin(), offsets.end() - 1);
  for (int k = 0; k < num_blocks(); ++k)
    for (int r : blocks_[static_cast<std::size_t>(k)].rows) owners[static_cast<std::size_t>(fill[static_cast<std::size_t>(r)]++)] = k;
  std::vector<int> stamp(blocks_.size(), -1);
  max_overlap_ = 0;
  for (int k = 0; k < num_blocks(); ++k) {
    int count = 0;
    for (int r : blocks_[static_cast<std::size_t>(k)].rows) {
      for (SparseOperator::InnerIterator it(a_, r); it; ++it) {
        const auto l = static_cast<std::size_t>(it.row());
        for (int o = offsets[l]; o < offsets[l + 1]; ++o) {
          const int j = owners[static_cast<std::size_t>(o)];
          if (stamp[static_cast<std::size_t>(j)] != k) {
            stamp[static_cast<std::size_t>(j)] = k;
            ++count;
          }
        }
      }
    }
    max_overlap_ = std::max(max_overlap_, count);
  }
}

Eigen::VectorXd SubspaceDecomposition::local_solve(int k, const Eigen::VectorXd& rhs) const {
  const Block& b = block(k);
  if (solver_.kind == LocalSolverKind::scaled_jacobi) return b.jacobi.cwiseProduct(rhs);
  return b.factor.solve(rhs);
}

Eigen::MatrixXd SubspaceDecomposition::local_solver_inverse(int k) const {
  const Block& b = block(k);
  if (solver_.kind == LocalSolverKind::scaled_jacobi) return b.jacobi.cwiseInverse().asDiagonal();
  return b.local_operator;
}

Eigen::VectorXd SubspaceDecomposition::apply_smoother(const Eigen::VectorXd& r) const {
  check_dimension(*this, r);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(r.size());
  Eigen::VectorXd gathered;
  for (int k = 0; k < num_blocks(); ++k) {
    const Block& b = blocks_[static_cast<std::size_t>(k)];
    const int m = static_cast<int>(b.rows.size());
    gathered.resize(m);
    for (int i = 0; i < m; ++i) gathered[i] = r[b.rows[static_cast<std::size_t>(i)]];
    if (b.embedding.size() == 0) {
      const Eigen::VectorXd z = local_solve(k, gathered);
      for (int i = 0; i < m; ++i) out[b.rows[static_cast<std::size_t>(i)]] += z[i];
    } else {
      const Eigen::VectorXd z = b.embedding * local_solve(k, b.embedding.transpose() * gathered);
      for (int i = 0; i < m; ++i) out[b.rows[static_cast<std::size_t>(i)]] += z[i];
    }
  }
  return out;
}

Eigen::VectorXd SubspaceDecomposition::apply_coarse(const Eigen::VectorXd& r) const {
  check_dimension(*this, r);
  if (!coarse_ || !coarse_factor_) return Eigen::VectorXd::Zero(r.size());
  const Eigen::VectorXd rc = coarse_->embedding.transpose() * r;
  const Eigen::VectorXd zc = coarse_factor_->solve(rc);
  return coarse_->embedding * zc;
}

Eigen::VectorXd SubspaceDecomposition::apply_preconditioner(const Eigen::VectorXd& r) const {
  Eigen::VectorXd out = apply_smoother(r);
  if (coarse_) out += apply_coarse(r);
  return out;
}

std::vector<double> SubspaceDecomposition::block_energies(const Eigen::VectorXd& r) const {
  check_dimension(*this, r);
  std::vector<double> energies;
  energies.reserve(blocks_.size());
  Eigen::VectorXd gathered;
  for (int k = 0; k < num_blocks(); ++k) {
    const Block& b = blocks_[static_cast<std::size_t>(k)];
    const int m = static_cast<int>(b.rows.size());
    gathered.resize(m);
    for (int i = 0; i < m; ++i) gathered[i] = r[b.rows[static_cast<std::size_t>(i)]];
    const Eigen::VectorXd local = b.embedding.size() == 0 ? gathered : Eigen::VectorXd(b.embedding.transpose() * gathered);
    energies.push_back(std::max(0.0, local.dot(local_solve(k, local))));
  }
  return energies;
}

std::vector<PatchSpace> vertex_patch_spaces(const FeSpace& space) {
  const TriangleMesh& mesh = space.mesh();
  const auto& nodes = LagrangeBasis::of_degree(space.degree()).nodes();
  std::vector<PatchSpace> patches(static_cast<std::size_t>(mesh.num_vertices()));
  for (int k = 0; k < mesh.num_vertices(); ++k) {
    PatchSpace& patch = patches[static_cast<std::size_t>(k)];
    patch.id = k;
    for (int t : mesh.vertex_triangles(k)) {
      const auto& tri = mesh.triangle(t);
      const int local = static_cast<int>(std::find(tri.begin(), tri.end(), k) - tri.begin());
      const auto dofs = space.element_dofs(t);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i][static_cast<std::size_t>(local)] == 0) continue;
        const int u = space.unknown(dofs[i]);
        if (u >= 0) patch.rows.push_back(u);
      }
    }
    std::sort(patch.rows.begin(), patch.rows.end());
    patch.rows.erase(std::unique(patch.rows.begin(), patch.rows.end()), patch.rows.end());
  }
  return patches;
}

SubspaceDecomposition two_level_decomposition(const FeSpace& fine, const FeSpace& coarse,
                                              std::span<const int> fine_to_coarse, const SparseOperator& a,
                                              LocalSolverOptions solver) {
  CoarseSpace c{interpolation_matrix(coarse, fine, fine_to_coarse)};
  return SubspaceDecomposition(a, vertex_patch_spaces(fine), std::move(c), solver);
}

SubspaceDecomposition one_level_decomposition(const FeSpace& space, const SparseOperator& a,
                                              LocalSolverOptions solver) {
  return SubspaceDecomposition(a, vertex_patch_spaces(space), std::nullopt, solver);
}

PcgResult pcg_solve(const SparseOperator& a, const Eigen::VectorXd& b, const SubspaceDecomposition& d,
                    double rel_tol, int max_iterations,
                    const std::function<void(int, const Eigen::VectorXd&)>& on_iterate) {
  if (a.rows() != d.dimension() || b.size() != a.rows())
    throw InvalidArgument("pcg_solve: dimension mismatch");
  const LinearMap apply_a = [&a](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out = a * in; };
  const LinearMap apply_b = [&d](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    out = d.apply_preconditioner(in);
  };
  return pcg(apply_a, apply_b, b, rel_tol, max_iterations, on_iterate);
}

namespace {

VerificationReport finish_report(const SparseOperator& a, double lo, double hi) {
  VerificationReport report;
  report.ndof = static_cast<int>(a.rows());
  report.lambda_min = lo;
  report.lambda_max = hi;
  report.cond = hi / lo;
  return report;
}

Eigen::MatrixXd dense_preconditioner(const SubspaceDecomposition& d) {
  const int n = d.dimension();
  Eigen::MatrixXd b(n, n);
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    unit[j] = 1.0;
    b.col(j) = d.apply_preconditioner(unit);
    unit[j] = 0.0;
  }
  return 0.5 * (b + b.transpose());
}

} // namespace

VerificationReport spectral_bounds(const SparseOperator& a, const SubspaceDecomposition& d, SpectralMethod method) {
  const int n = static_cast<int>(a.rows());
  if (n != d.dimension()) throw InvalidArgument("spectral_bounds: dimension mismatch");
  if (n == 0) throw InvalidArgument("spectral_bounds: empty space");

  if (method == SpectralMethod::dense_eig) {
    if (n > kDenseEigCap)
      throw InvalidArgument(fmt::format("spectral_bounds: dense_eig is limited to {} unknowns, got {}", kDenseEigCap, n));
    const Eigen::MatrixXd ad = Eigen::MatrixXd(a);
    Eigen::LLT<Eigen::MatrixXd> llt(ad);
    if (llt.info() != Eigen::Success) throw SolverError("spectral_bounds: operator is not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd m = l.transpose() * dense_preconditioner(d) * l;
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    return finish_report(a, eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff());
  }

  // Lanczos for BA, self-adjoint in the A inner product
  const int steps = std::min(kLanczosIterations, n);
  std::vector<Eigen::VectorXd> q;
  std::vector<Eigen::VectorXd> aq;
  std::vector<double> alpha;
  std::vector<double> beta;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd av = a * v;
  double norm = std::sqrt(v.dot(av));
  v /= norm;
  av /= norm;
  for (int j = 0; j < steps; ++j) {
    q.push_back(v);
    aq.push_back(av);
    Eigen::VectorXd w = d.apply_preconditioner(av);
    const double aj = w.dot(av);
    alpha.push_back(aj);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < q.size(); ++i) w -= w.dot(aq[i]) * q[i];
    if (j + 1 == steps) break;
    Eigen::VectorXd aw = a * w;
    const double bj = std::sqrt(std::max(0.0, w.dot(aw)));
    if (!(bj > 1e-12 * std::abs(aj))) break;
    beta.push_back(bj);
    v = w / bj;
    av = aw / bj;
  }
  const int m = static_cast<int>(alpha.size());
  Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
  Eigen::VectorXd sub = Eigen::VectorXd::Zero(std::max(m - 1, 0));
  for (int i = 0; i + 1 < m; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
  double lo = diag[0];
  double hi = diag[0];
  if (m > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    lo = eig.eigenvalues().minCoeff();
    hi = eig.eigenvalues().maxCoeff();
  }
  VerificationReport report = finish_report(a, lo, hi);
  report.lanczos_steps = m;
  return report;
}

VerificationReport spectral_bounds(const SparseOperator& a, const SubspaceDecomposition& d) {
  return spectral_bounds(a, d, a.rows() <= kDenseEigCap ? SpectralMethod::dense_eig : SpectralMethod::lanczos);
}

double verify_decomposition_identity(const SubspaceDecomposition& d, std::span<const Eigen::VectorXd> trials) {
  const int n = d.dimension();
  if (n > kIdentityCap)
    throw InvalidArgument(fmt::format("verify_decomposition_identity: limited to {} unknowns, got {}", kIdentityCap, n));
  for (const auto& v : trials)
    if (v.size() != n) throw InvalidArgument("verify_decomposition_identity: trial vector of the wrong size");

  const Eigen::MatrixXd a = Eigen::MatrixXd(d.fine_operator());

  // production side: <B^{-1} v, v> from the dense B
  const Eigen::MatrixXd b = dense_preconditioner(d);
  Eigen::LLT<Eigen::MatrixXd> bfac(b);
  if (bfac.info() != Eigen::Success)
    throw InvalidArgument("verify_decomposition_identity: rank-deficient decomposition, B is singular");

  // oracle side: min z^T D z subject to R z = v
  std::vector<Eigen::MatrixXd> columns;
  std::vector<Eigen::MatrixXd> weights;
  if (d.has_coarse() && d.coarse_embedding().cols() > 0) {
    const Eigen::MatrixXd p = Eigen::MatrixXd(d.coarse_embedding());
    columns.push_back(p);
    weights.push_back(p.transpose() * a * p);
  }
  for (int k = 0; k < d.num_blocks(); ++k) {
    const auto& blk = d.block(k);
    const int m = static_cast<int>(blk.rows.size());
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(n, m);
    for (int i = 0; i < m; ++i) scatter(blk.rows[static_cast<std::size_t>(i)], i) = 1.0;
    const Eigen::MatrixXd e = blk.embedding.size() == 0 ? scatter : Eigen::MatrixXd(scatter * blk.embedding);
    const Eigen::MatrixXd ak = e.transpose() * a * e;
    if (d.local_solver().kind == LocalSolverKind::scaled_jacobi)
      weights.push_back(Eigen::MatrixXd(ak.diagonal().asDiagonal()) / d.local_solver().omega);
    else
      weights.push_back(ak);
    columns.push_back(e);
  }
  int total = 0;
  for (const auto& c : columns) total += static_cast<int>(c.cols());
  Eigen::MatrixXd r(n, total);
  Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(total, total);
  int offset = 0;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const int m = static_cast<int>(columns[i].cols());
    r.middleCols(offset, m) = columns[i];
    dm.block(offset, offset, m, m) = weights[i];
    offset += m;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(r.transpose());
  if (rank_check.rank() < n)
    throw InvalidArgument("verify_decomposition_identity: rank-deficient KKT system, subspaces do not cover the space");

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(total + n, total + n);
  kkt.topLeftCorner(total, total) = dm;
  kkt.topRightCorner(total, n) = r.transpose();
  kkt.bottomLeftCorner(n, total) = r;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

  double worst = 0.0;
  for (const auto& v : trials) {
    const double lhs = v.dot(bfac.solve(v));
    Eigen::VectorXd rhs_vec = Eigen::VectorXd::Zero(total + n);
    rhs_vec.tail(n) = v;
    const Eigen::VectorXd sol = lu.solve(rhs_vec);
    const Eigen::VectorXd z = sol.head(total);
    const double rhs = z.dot(dm * z);
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

void write_verification_csv(std::ostream& out, std::span<const VerificationReport> reports) {
  out << "level,ndof,lambda_min,lambda_max,cond,identity_err\n";
  for (const auto& r : reports)
    out << fmt::format("{},{},{},{},{},{}\n", r.level, r.ndof, r.lambda_min, r.lambda_max, r.cond, r.identity_err);
}

} // namespace asfem
