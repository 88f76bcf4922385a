#include "asfem/estimate.hpp"

#include "asfem/error.hpp"
#include "asfem/lagrange.hpp"
#include "asfem/quadrature.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace asfem {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::array<int, 2>> monomials_up_to(int degree) {
  std::vector<std::array<int, 2>> out;
  for (int d = 0; d <= degree; ++d)
    for (int j = 0; j <= d; ++j) out.push_back({d - j, j});
  return out;
}

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

double root_sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

} // namespace

double ResidualData::Samples::norm_squared() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i] * values[i];
  return s;
}

ResidualData residual_data(const FeFunction& u_h, const Coefficient& k, const ScalarField& f, int quadrature_order) {
  const TriangleMesh& mesh = u_h.space().mesh();
  ResidualData data;
  data.elements.resize(static_cast<std::size_t>(mesh.num_triangles()));
  data.edges.resize(static_cast<std::size_t>(mesh.num_edges()));
  data.h_element.resize(static_cast<std::size_t>(mesh.num_triangles()));
  data.h_edge.resize(static_cast<std::size_t>(mesh.num_edges()));

  const TriangleRule& rule = triangle_rule(quadrature_order);
  const bool has_curvature = u_h.space().degree() > 1;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementMap map = ElementMap::of(mesh, t);
    const Eigen::Matrix2d& kt = k.on_region(mesh.region(t));
    auto& s = data.elements[static_cast<std::size_t>(t)];
    data.h_element[static_cast<std::size_t>(t)] = mesh.diameter(t);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point x = map.to_physical(rule.points[q]);
      double value = f(x);
      if (has_curvature) value += (kt * u_h.hessian(t, rule.points[q])).trace();
      s.points.push_back(x);
      s.weights.push_back(rule.weights[q] * std::abs(map.det));
      s.values.push_back(value);
    }
  }

  const LineRule& line = line_rule(quadrature_order);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const MeshEdge& edge = mesh.edge(e);
    data.h_edge[static_cast<std::size_t>(e)] = mesh.edge_length(e);
    if (edge.is_boundary()) continue;
    const Point& a = mesh.vertex(edge.vertices[0]);
    const Point tangent = mesh.vertex(edge.vertices[1]) - a;
    const double length = tangent.norm();
    Eigen::Vector2d normal(tangent.y() / length, -tangent.x() / length);
    const int t1 = edge.triangles[0];
    const int t2 = edge.triangles[1];
    if ((mesh.centroid(t1) - a).dot(normal) > 0.0) normal = -normal;
    const ElementMap m1 = ElementMap::of(mesh, t1);
    const ElementMap m2 = ElementMap::of(mesh, t2);
    const Eigen::Matrix2d& k1 = k.on_region(mesh.region(t1));
    const Eigen::Matrix2d& k2 = k.on_region(mesh.region(t2));
    auto& s = data.edges[static_cast<std::size_t>(e)];
    for (std::size_t q = 0; q < line.size(); ++q) {
      const Point x = a + line.points[q] * tangent;
      const Eigen::Vector2d g1 = u_h.gradient(t1, m1.to_reference(x));
      const Eigen::Vector2d g2 = u_h.gradient(t2, m2.to_reference(x));
      s.points.push_back(x);
      s.weights.push_back(line.weights[q] * length);
      s.values.push_back((k1 * g1 - k2 * g2).dot(normal));
    }
  }
  return data;
}

ExplicitEstimate explicit_estimator(const TriangleMesh& mesh, const ResidualData& data) {
  if (data.elements.size() != static_cast<std::size_t>(mesh.num_triangles()) ||
      data.edges.size() != static_cast<std::size_t>(mesh.num_edges()))
    throw InvalidArgument("explicit_estimator: residual data belongs to a different mesh");
  std::vector<double> element_term(static_cast<std::size_t>(mesh.num_triangles()));
  std::vector<double> edge_term(static_cast<std::size_t>(mesh.num_edges()), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double h = data.h_element[static_cast<std::size_t>(t)];
    element_term[static_cast<std::size_t>(t)] = h * h * data.elements[static_cast<std::size_t>(t)].norm_squared();
  }
  for (int e = 0; e < mesh.num_edges(); ++e)
    if (!mesh.edge(e).is_boundary())
      edge_term[static_cast<std::size_t>(e)] =
          data.h_edge[static_cast<std::size_t>(e)] * data.edges[static_cast<std::size_t>(e)].norm_squared();

  ExplicitEstimate out;
  out.element.resize(static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double s = element_term[static_cast<std::size_t>(t)];
    for (int e : mesh.triangle_edges(t)) s += 0.5 * edge_term[static_cast<std::size_t>(e)];
    out.element[static_cast<std::size_t>(t)] = std::sqrt(s);
  }
  out.vertex.resize(static_cast<std::size_t>(mesh.num_vertices()));
  for (int k = 0; k < mesh.num_vertices(); ++k) {
    const VertexPatch patch = vertex_patch(mesh, k);
    double s = 0.0;
    for (int t : patch.triangles) s += element_term[static_cast<std::size_t>(t)];
    for (int e : patch.interior_edges) s += edge_term[static_cast<std::size_t>(e)];
    out.vertex[static_cast<std::size_t>(k)] = std::sqrt(s);
  }
  return out;
}

// ------------------------------------------------------------------ bubbles

BubbleSpace BubbleSpace::build(const TriangleMesh& mesh, const VertexPatch& patch, int p, const Coefficient& k) {
  if (p < 1) throw InvalidArgument("BubbleSpace: degree must be >= 1");
  if (patch.triangles.empty()) throw InvalidArgument(fmt::format("BubbleSpace: patch of vertex {} is empty", patch.vertex));
  BubbleSpace b;
  b.mesh_ = &mesh;
  b.patch_ = patch;
  b.p_ = p;
  b.center_ = mesh.vertex(patch.vertex);
  b.scale_ = patch.diameter;
  for (int t : patch.triangles) b.maps_.push_back(ElementMap::of(mesh, t));
  const auto monomials = monomials_up_to(p - 1);
  for (int t : patch.triangles)
    for (const auto& m : monomials) b.candidates_.push_back({t, -1, m});
  for (int e : patch.interior_edges)
    for (const auto& m : monomials) b.candidates_.push_back({-1, e, m});

  const int n = b.candidate_count();
  const TriangleRule& rule = triangle_rule(2 * p + 4);
  std::vector<double> values(static_cast<std::size_t>(n));
  std::vector<Eigen::Vector2d> grads(static_cast<std::size_t>(n));
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixX2d grad_matrix(n, 2);
  for (int t : patch.triangles) {
    const ElementMap map = ElementMap::of(mesh, t);
    const Eigen::Matrix2d& kt = k.on_region(mesh.region(t));
    for (std::size_t q = 0; q < rule.size(); ++q) {
      b.evaluate(t, rule.points[q], values, grads);
      for (int i = 0; i < n; ++i) grad_matrix.row(i) = grads[static_cast<std::size_t>(i)].transpose();
      g.noalias() += rule.weights[q] * std::abs(map.det) * grad_matrix * kt * grad_matrix.transpose();
    }
  }
  b.candidate_stiffness_ = 0.5 * (g + g.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b.candidate_stiffness_);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = kRankTolerance * lambda.maxCoeff();
  std::vector<int> kept;
  for (int i = 0; i < n; ++i)
    if (lambda[i] > cutoff) kept.push_back(i);
  if (kept.empty()) throw InvariantViolation(fmt::format("BubbleSpace: empty basis on patch {}", patch.vertex));
  b.coefficients_.resize(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c)
    b.coefficients_.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(kept[c]);
  b.stiffness_ = b.coefficients_.transpose() * b.candidate_stiffness_ * b.coefficients_;
  b.stiffness_ = 0.5 * (b.stiffness_ + b.stiffness_.transpose()).eval();
  return b;
}

void BubbleSpace::evaluate(int t, const Eigen::Vector2d& xi, std::span<double> values,
                           std::span<Eigen::Vector2d> gradients) const {
  const auto slot = std::find(patch_.triangles.begin(), patch_.triangles.end(), t) - patch_.triangles.begin();
  if (slot == static_cast<std::ptrdiff_t>(patch_.triangles.size()))
    throw InvalidArgument(fmt::format("BubbleSpace: triangle {} is not in the patch of vertex {}", t, patch_.vertex));
  const ElementMap& map = maps_[static_cast<std::size_t>(slot)];
  const std::array<double, 3> lam{1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
  const std::array<Eigen::Vector2d, 3> dlam{map.inverse_transpose * Eigen::Vector2d(-1.0, -1.0),
                                            map.inverse_transpose * Eigen::Vector2d(1.0, 0.0),
                                            map.inverse_transpose * Eigen::Vector2d(0.0, 1.0)};
  const Eigen::Vector2d s = (map.to_physical(xi) - center_) / scale_;
  const auto& tri = mesh_->triangle(t);
  for (std::size_t c = 0; c < candidates_.size(); ++c) {
    const Candidate& cand = candidates_[c];
    double bubble = 0.0;
    Eigen::Vector2d dbubble = Eigen::Vector2d::Zero();
    if (cand.triangle == t) {
      bubble = 27.0 * lam[0] * lam[1] * lam[2];
      dbubble = 27.0 * (lam[1] * lam[2] * dlam[0] + lam[0] * lam[2] * dlam[1] + lam[0] * lam[1] * dlam[2]);
    } else if (cand.edge >= 0) {
      const MeshEdge& edge = mesh_->edge(cand.edge);
      if (edge.triangles[0] == t || edge.triangles[1] == t) {
        const auto la = static_cast<std::size_t>(std::find(tri.begin(), tri.end(), edge.vertices[0]) - tri.begin());
        const auto lb = static_cast<std::size_t>(std::find(tri.begin(), tri.end(), edge.vertices[1]) - tri.begin());
        bubble = 4.0 * lam[la] * lam[lb];
        dbubble = 4.0 * (lam[lb] * dlam[la] + lam[la] * dlam[lb]);
      }
    }
    if (bubble == 0.0 && dbubble.isZero()) {
      values[c] = 0.0;
      gradients[c].setZero();
      continue;
    }
    const int i = cand.monomial[0];
    const int j = cand.monomial[1];
    double m = 1.0;
    Eigen::Vector2d dm = Eigen::Vector2d::Zero();
    if (i + j > 0) {
      const double xi_1 = ipow(s.x(), i - 1);
      const double yj_1 = ipow(s.y(), j - 1);
      const double xi_0 = i > 0 ? xi_1 * s.x() : 1.0;
      const double yj_0 = j > 0 ? yj_1 * s.y() : 1.0;
      m = xi_0 * yj_0;
      dm = Eigen::Vector2d(i > 0 ? i * xi_1 * yj_0 / scale_ : 0.0, j > 0 ? j * xi_0 * yj_1 / scale_ : 0.0);
    }
    values[c] = bubble * m;
    gradients[c] = m * dbubble + bubble * dm;
  }
}

double patch_estimate(const BubbleSpace& bubble, const ResidualFunctional& r) {
  const int n = bubble.candidate_count();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int t : bubble.patch().triangles) {
    const LocalBasis on_t = [&bubble, t](const Eigen::Vector2d& xi, std::span<double> v, std::span<Eigen::Vector2d> g) {
      bubble.evaluate(t, xi, v, g);
    };
    rhs += r.on_element(t, n, on_t);
  }
  const Eigen::VectorXd reduced = bubble.coefficients().transpose() * rhs;
  Eigen::LLT<Eigen::MatrixXd> llt(bubble.stiffness());
  if (llt.info() != Eigen::Success)
    throw SolverError(fmt::format("patch_estimate: singular local matrix on patch {}", bubble.patch().vertex));
  return std::sqrt(std::max(0.0, reduced.dot(llt.solve(reduced))));
}

// ----------------------------------------------------------------- enriched

double enriched_patch_estimate(const VertexPatch& patch, const ResidualFunctional& r, int q) {
  if (q < 1) throw InvalidArgument("enriched_patch_estimate: q must be >= 1");
  const TriangleMesh& mesh = r.mesh();
  const int degree = r.solution().space().degree() + q;
  std::vector<int> local_of(static_cast<std::size_t>(mesh.num_vertices()), -1);
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> regions;
  for (int t : patch.triangles) {
    std::array<int, 3> tri{};
    for (int i = 0; i < 3; ++i) {
      const int v = mesh.triangle(t)[static_cast<std::size_t>(i)];
      if (local_of[static_cast<std::size_t>(v)] < 0) {
        local_of[static_cast<std::size_t>(v)] = static_cast<int>(vertices.size());
        vertices.push_back(mesh.vertex(v));
      }
      tri[static_cast<std::size_t>(i)] = local_of[static_cast<std::size_t>(v)];
    }
    triangles.push_back(tri);
    regions.push_back(mesh.region(t));
  }
  auto local_mesh = std::make_shared<const TriangleMesh>(std::move(vertices), std::move(triangles), std::move(regions));
  const FeSpace space(local_mesh, degree);
  if (space.num_unknowns() == 0) return 0.0;
  const Eigen::MatrixXd a = Eigen::MatrixXd(assemble_stiffness(space, r.coefficient()));

  const LagrangeBasis& basis = LagrangeBasis::of_degree(degree);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(space.num_unknowns());
  for (std::size_t i = 0; i < patch.triangles.size(); ++i) {
    const int t = patch.triangles[i];
    const Eigen::Matrix2d jit = ElementMap::of(mesh, t).inverse_transpose;
    const LocalBasis on_t = [&basis, jit](const Eigen::Vector2d& xi, std::span<double> v, std::span<Eigen::Vector2d> g) {
      basis.values(xi, v);
      basis.gradients(xi, g);
      for (auto& gi : g) gi = jit * gi;
    };
    const Eigen::VectorXd local = r.on_element(t, basis.size(), on_t);
    const auto dofs = space.element_dofs(static_cast<int>(i));
    for (int j = 0; j < basis.size(); ++j) {
      const int u = space.unknown(dofs[static_cast<std::size_t>(j)]);
      if (u >= 0) rhs[u] += local[j];
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw SolverError(fmt::format("enriched_patch_estimate: singular local matrix on patch {}", patch.vertex));
  return std::sqrt(std::max(0.0, rhs.dot(llt.solve(rhs))));
}

EnrichedProblem enriched_problem(const ResidualFunctional& r, int q) {
  if (q < 1) throw InvalidArgument("enriched_problem: q must be >= 1");
  const FeSpace& vh = r.solution().space();
  EnrichedProblem problem;
  problem.q = q;
  auto space = std::make_shared<const FeSpace>(vh.mesh_ptr(), vh.degree() + q);
  problem.stiffness = assemble_stiffness(*space, r.coefficient());
  problem.residual = r.on_space(*space);
  problem.coarse_embedding = interpolation_matrix(vh, *space, identity_triangle_map(vh.mesh()));
  problem.space = std::move(space);
  return problem;
}

SubspaceDecomposition estimator_decomposition(const EnrichedProblem& problem) {
  return SubspaceDecomposition(problem.stiffness, vertex_patch_spaces(*problem.space),
                               CoarseSpace{problem.coarse_embedding});
}

SubspaceDecomposition bubble_decomposition(const EnrichedProblem& problem, std::span<const BubbleSpace> bubbles) {
  const FeSpace& space = *problem.space;
  const LagrangeBasis& basis = LagrangeBasis::of_degree(space.degree());
  std::vector<PatchSpace> patches = vertex_patch_spaces(space);
  std::vector<int> position(static_cast<std::size_t>(space.num_unknowns()), -1);
  std::vector<PatchSpace> blocks;
  for (const BubbleSpace& bubble : bubbles) {
    if (space.degree() < bubble.degree() + 2)
      throw InvalidArgument("bubble_decomposition: the enriched space does not contain the bubbles (need q >= 2)");
    const int k = bubble.patch().vertex;
    PatchSpace block = patches[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < block.rows.size(); ++i) position[static_cast<std::size_t>(block.rows[i])] = static_cast<int>(i);
    const int n = bubble.candidate_count();
    Eigen::MatrixXd nodal = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(block.rows.size()), n);
    std::vector<double> values(static_cast<std::size_t>(n));
    std::vector<Eigen::Vector2d> grads(static_cast<std::size_t>(n));
    for (int t : bubble.patch().triangles) {
      const auto dofs = space.element_dofs(t);
      for (int i = 0; i < basis.size(); ++i) {
        const int u = space.unknown(dofs[static_cast<std::size_t>(i)]);
        if (u < 0 || position[static_cast<std::size_t>(u)] < 0) continue;
        bubble.evaluate(t, basis.node_point(i), values, grads);
        nodal.row(position[static_cast<std::size_t>(u)]) = Eigen::Map<const Eigen::RowVectorXd>(values.data(), n);
      }
    }
    for (int r : block.rows) position[static_cast<std::size_t>(r)] = -1;
    block.embedding = nodal * bubble.coefficients();
    blocks.push_back(std::move(block));
  }
  return SubspaceDecomposition(problem.stiffness, std::move(blocks), CoarseSpace{problem.coarse_embedding});
}

double smoother_estimate(const SubspaceDecomposition& d, const Eigen::VectorXd& r) {
  if (r.size() != d.dimension()) throw InvalidArgument("smoother_estimate: residual does not match the decomposition");
  return r.dot(d.apply_smoother(r));
}

Oscillation data_oscillation(const TriangleMesh& mesh, const ScalarField& f, int p, int quadrature_order) {
  if (p < 1) throw InvalidArgument("data_oscillation: degree must be >= 1");
  const auto monomials = monomials_up_to(p - 1);
  const int m = static_cast<int>(monomials.size());
  const TriangleRule& rule = triangle_rule(std::max(quadrature_order, 2 * (p - 1)));
  Oscillation osc;
  osc.element.resize(static_cast<std::size_t>(mesh.num_triangles()));
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rule.size()), m);
  for (std::size_t q = 0; q < rule.size(); ++q)
    for (int i = 0; i < m; ++i)
      values(static_cast<Eigen::Index>(q), i) = std::pow(rule.points[q].x(), monomials[static_cast<std::size_t>(i)][0]) *
                                                std::pow(rule.points[q].y(), monomials[static_cast<std::size_t>(i)][1]);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), static_cast<Eigen::Index>(rule.size()));
  const Eigen::MatrixXd mass = values.transpose() * w.asDiagonal() * values;
  const Eigen::LDLT<Eigen::MatrixXd> mass_factor(mass);
  double total = 0.0;
  Eigen::VectorXd fq(static_cast<Eigen::Index>(rule.size()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementMap map = ElementMap::of(mesh, t);
    for (std::size_t q = 0; q < rule.size(); ++q) fq[static_cast<Eigen::Index>(q)] = f(map.to_physical(rule.points[q]));
    const Eigen::VectorXd c = mass_factor.solve(values.transpose() * w.cwiseProduct(fq));
    const Eigen::VectorXd diff = fq - values * c;
    const double h = mesh.diameter(t);
    const double term = h * h * std::abs(map.det) * diff.dot(w.cwiseProduct(diff));
    osc.element[static_cast<std::size_t>(t)] = term;
    total += term;
  }
  osc.total = std::sqrt(total);
  return osc;
}

EstimatorRun estimate_all(const FeFunction& u_h, const Coefficient& k, const ScalarField& f,
                          const EstimatorOptions& options) {
  const TriangleMesh& mesh = u_h.space().mesh();
  const int p = u_h.space().degree();
  const ResidualFunctional r(u_h, k, f, options.quadrature_order);
  EstimatorRun run;
  EstimatorReport& report = run.report;
  report.q = options.q;

  const ResidualData data = residual_data(u_h, k, f, options.quadrature_order);
  const ExplicitEstimate zeta = explicit_estimator(mesh, data);
  report.zeta_vertex = zeta.vertex;
  report.zeta_element = zeta.element;
  report.zeta_total = root_sum_squares(zeta.vertex);

  if (options.bubbles) {
    report.eta_tilde.resize(static_cast<std::size_t>(mesh.num_vertices()));
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      const BubbleSpace bubble = BubbleSpace::build(mesh, vertex_patch(mesh, v), p, k);
      report.eta_tilde[static_cast<std::size_t>(v)] = patch_estimate(bubble, r);
    }
    report.eta_tilde_total = root_sum_squares(report.eta_tilde);
  } else {
    report.eta_tilde_total = kNaN;
  }

  if (options.enriched) {
    run.enriched = std::make_unique<EnrichedProblem>(enriched_problem(r, options.q));
    run.decomposition = std::make_unique<SubspaceDecomposition>(estimator_decomposition(*run.enriched));
    const std::vector<double> energies = run.decomposition->block_energies(run.enriched->residual);
    report.eta_enriched.assign(static_cast<std::size_t>(mesh.num_vertices()), 0.0);
    double sum = 0.0;
    for (int b = 0; b < run.decomposition->num_blocks(); ++b) {
      const double e = energies[static_cast<std::size_t>(b)];
      report.eta_enriched[static_cast<std::size_t>(run.decomposition->block(b).id)] = std::sqrt(e);
      sum += e;
    }
    report.eta_enriched_total = std::sqrt(sum);
    report.smoother_estimate = smoother_estimate(*run.decomposition, run.enriched->residual);
  } else {
    report.eta_enriched_total = kNaN;
    report.smoother_estimate = kNaN;
  }

  const Oscillation osc = data_oscillation(mesh, f, p, options.quadrature_order);
  report.osc_element = osc.element;
  report.osc = osc.total;
  return run;
}

void write_estimator_csv(std::ostream& out, const EstimatorReport& report) {
  out << "kind,id,value\n";
  auto rows = [&out](const char* kind, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out << fmt::format("{},{},{}\n", kind, i, values[i]);
  };
  rows("eta_tilde", report.eta_tilde);
  rows("eta_enriched", report.eta_enriched);
  rows("zeta_vertex", report.zeta_vertex);
  rows("zeta_element", report.zeta_element);
  rows("osc_element", report.osc_element);
  out << fmt::format("eta_tilde_total,total,{}\n", report.eta_tilde_total);
  out << fmt::format("eta_enriched_total,total,{}\n", report.eta_enriched_total);
  out << fmt::format("zeta_total,total,{}\n", report.zeta_total);
  out << fmt::format("smoother_estimate,total,{}\n", report.smoother_estimate);
  out << fmt::format("osc,total,{}\n", report.osc);
}

} // namespace asfem
