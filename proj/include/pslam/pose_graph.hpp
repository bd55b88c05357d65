#pragma once

#include "pslam/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <vector>

namespace pslam {

using VertexId = std::uint64_t;

enum class EdgeKind { odometry, loop_closure };

struct Vertex {
  VertexId id = 0;
  Pose pose;
  PlaneCloud keyframe;
  bool fixed = false;
};

struct Edge {
  VertexId from = 0;
  VertexId to = 0;
  Pose measurement;  // relative transform from -> to
  Mat6 info = Mat6::Identity();
  EdgeKind kind = EdgeKind::odometry;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse SE(3) pose graph: vertices carry the optimized pose estimate and
/// the keyframe plane cloud, edges carry relative-pose measurements with
/// 6x6 information weights. The first vertex added is fixed and anchors
/// the gauge.
class Graph {
 public:
  VertexId add_vertex(const Pose& pose, PlaneCloud keyframe = {});
  std::size_t add_edge(VertexId from, VertexId to, const Pose& meas,
                       const Mat6& info, EdgeKind kind = EdgeKind::odometry);

  const Vertex& vertex(VertexId id) const;
  Vertex& vertex(VertexId id);
  bool has_vertex(VertexId id) const { return vertices_.count(id) != 0; }
  const std::map<VertexId, Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  void set_fixed(VertexId id, bool fixed);

 private:
  std::map<VertexId, Vertex> vertices_;
  std::vector<Edge> edges_;
  VertexId next_id_ = 0;
};

/// r = log(meas^-1 * (pose_from^-1 * pose_to)); zero iff the poses satisfy
/// the measurement exactly.
Vec6 edge_residual(const Edge& e, const Graph& g);

/// Analytic Jacobians of the edge residual w.r.t. left increments
/// exp(delta) * pose on each endpoint.
void edge_jacobians(const Edge& e, const Graph& g, Vec6& r, Mat6& J_from,
                    Mat6& J_to);

double chi2(const Graph& g);

enum class LinearSolver { sparse_cholesky, conjugate_gradient };

struct OptimizeOptions {
  int max_iters = 50;
  double term_tol = 1e-9;  // relative chi2 change on an accepted step
  LinearSolver solver = LinearSolver::sparse_cholesky;
  double lambda_init = 1e-4;
  double lambda_max = 1e12;
};

struct OptimizeReport {
  int iterations = 0;
  double initial_chi2 = 0.0;
  double final_chi2 = 0.0;
  std::vector<double> chi2_sequence;  // initial value, then accepted steps
  std::vector<VertexId> untouched;    // vertices unreachable from any anchor
};

/// Levenberg-Marquardt over the free vertices reachable from a fixed
/// vertex. Accepted steps never increase chi2. Throws GraphError if the
/// damped normal equations stay singular after escalation.
OptimizeReport optimize(Graph& g, const OptimizeOptions& opts = {});

/// Plain-text export: `VERTEX id tx ty tz qx qy qz qw` and
/// `EDGE from to tx ty tz qx qy qz qw i11..i66` (21 upper-triangle info
/// entries, row-major). Doubles are printed with 17 significant digits so
/// the text round-trips values exactly.
void write_graph_text(std::ostream& os, const Graph& g);
Graph read_graph_text(std::istream& is);

}  // namespace pslam
