#include "pslam/pose_graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cinttypes>
#include <cstdio>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace pslam {

VertexId Graph::add_vertex(const Pose& pose, PlaneCloud keyframe) {
  Vertex v;
  v.id = next_id_++;
  v.pose = pose;
  v.keyframe = std::move(keyframe);
  v.fixed = vertices_.empty();
  VertexId id = v.id;
  vertices_.emplace(id, std::move(v));
  return id;
}

std::size_t Graph::add_edge(VertexId from, VertexId to, const Pose& meas,
                            const Mat6& info, EdgeKind kind) {
  if (!has_vertex(from) || !has_vertex(to))
    throw GraphError("add_edge: unknown vertex");
  if (from == to) throw GraphError("add_edge: self edge");
  Eigen::LLT<Mat6> llt(info);
  if (llt.info() != Eigen::Success)
    throw GraphError("add_edge: information matrix not positive definite");
  edges_.push_back({from, to, meas, info, kind});
  return edges_.size() - 1;
}

const Vertex& Graph::vertex(VertexId id) const {
  auto it = vertices_.find(id);
  if (it == vertices_.end()) throw GraphError("unknown vertex");
  return it->second;
}

Vertex& Graph::vertex(VertexId id) {
  auto it = vertices_.find(id);
  if (it == vertices_.end()) throw GraphError("unknown vertex");
  return it->second;
}

void Graph::set_fixed(VertexId id, bool fixed) { vertex(id).fixed = fixed; }

Vec6 edge_residual(const Edge& e, const Graph& g) {
  Pose rel = pose_compose(pose_inverse(g.vertex(e.from).pose),
                          g.vertex(e.to).pose);
  return se3_log(pose_compose(pose_inverse(e.measurement), rel));
}

void edge_jacobians(const Edge& e, const Graph& g, Vec6& r, Mat6& J_from,
                    Mat6& J_to) {
  const Pose& A = g.vertex(e.from).pose;
  const Pose& B = g.vertex(e.to).pose;
  Pose E = pose_compose(pose_inverse(pose_compose(A, e.measurement)), B);
  r = se3_log(E);
  // Left-perturbing B by exp(d) turns E into exp(Ad_{(A M)^-1} d) E.
  Mat6 W = se3_adjoint(pose_inverse(pose_compose(A, e.measurement)));
  J_to = se3_left_jacobian_inv(r) * W;
  J_from = -J_to;
}

double chi2(const Graph& g) {
  double sum = 0.0;
  for (const Edge& e : g.edges()) {
    Vec6 r = edge_residual(e, g);
    sum += r.dot(e.info * r);
  }
  return sum;
}

namespace {

// Vertices reachable from any fixed vertex, walking edges undirected.
std::unordered_set<VertexId> reachable_from_anchors(const Graph& g) {
  std::unordered_map<VertexId, std::vector<VertexId>> adj;
  for (const Edge& e : g.edges()) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::unordered_set<VertexId> seen;
  std::deque<VertexId> queue;
  for (const auto& [id, v] : g.vertices()) {
    if (v.fixed) {
      seen.insert(id);
      queue.push_back(id);
    }
  }
  while (!queue.empty()) {
    VertexId id = queue.front();
    queue.pop_front();
    for (VertexId nb : adj[id]) {
      if (seen.insert(nb).second) queue.push_back(nb);
    }
  }
  return seen;
}

double partial_chi2(const Graph& g, const std::vector<const Edge*>& edges) {
  double sum = 0.0;
  for (const Edge* e : edges) {
    Vec6 r = edge_residual(*e, g);
    sum += r.dot(e->info * r);
  }
  return sum;
}

}  // namespace

OptimizeReport optimize(Graph& g, const OptimizeOptions& opts) {
  OptimizeReport report;

  bool any_fixed = false;
  for (const auto& [id, v] : g.vertices()) any_fixed |= v.fixed;
  if (!any_fixed) throw GraphError("optimize: no fixed vertex anchors gauge");

  auto reachable = reachable_from_anchors(g);
  std::unordered_map<VertexId, int> slot;
  std::vector<VertexId> free_ids;
  for (const auto& [id, v] : g.vertices()) {
    if (!reachable.count(id)) {
      report.untouched.push_back(id);
      continue;
    }
    if (!v.fixed) {
      slot[id] = int(free_ids.size());
      free_ids.push_back(id);
    }
  }

  std::vector<const Edge*> active;
  for (const Edge& e : g.edges())
    if (reachable.count(e.from)) active.push_back(&e);

  report.initial_chi2 = partial_chi2(g, active);
  report.final_chi2 = report.initial_chi2;
  report.chi2_sequence.push_back(report.initial_chi2);
  const int n = int(free_ids.size());
  if (n == 0 || active.empty()) return report;

  using Triplet = Eigen::Triplet<double>;
  Eigen::SparseMatrix<double> H(6 * n, 6 * n);
  Eigen::VectorXd b(6 * n);
  std::vector<Triplet> triplets;

  double lambda = opts.lambda_init;
  double current = report.initial_chi2;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    triplets.clear();
    b.setZero();
    for (const Edge* e : active) {
      Vec6 r;
      Mat6 Jf, Jt;
      edge_jacobians(*e, g, r, Jf, Jt);
      auto add_block = [&](int si, int sj, const Mat6& m) {
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j)
            triplets.emplace_back(si + i, sj + j, m(i, j));
      };
      const bool from_free = slot.count(e->from) != 0;
      const bool to_free = slot.count(e->to) != 0;
      const int sf = from_free ? 6 * slot[e->from] : -1;
      const int st = to_free ? 6 * slot[e->to] : -1;
      if (from_free) {
        add_block(sf, sf, Jf.transpose() * e->info * Jf);
        b.segment<6>(sf) += Jf.transpose() * (e->info * r);
      }
      if (to_free) {
        add_block(st, st, Jt.transpose() * e->info * Jt);
        b.segment<6>(st) += Jt.transpose() * (e->info * r);
      }
      if (from_free && to_free) {
        Mat6 off = Jf.transpose() * e->info * Jt;
        add_block(sf, st, off);
        add_block(st, sf, off.transpose());
      }
    }

    // Vanished gradient: already at a stationary point, leave poses alone.
    if (b.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + current)) break;

    bool stepped = false;
    while (!stepped) {
      for (int i = 0; i < 6 * n; ++i) triplets.emplace_back(i, i, lambda);
      H.setFromTriplets(triplets.begin(), triplets.end());
      for (int i = 0; i < 6 * n; ++i) triplets.pop_back();

      Eigen::VectorXd delta;
      bool solved = false;
      if (opts.solver == LinearSolver::sparse_cholesky) {
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(H);
        if (llt.info() == Eigen::Success) {
          delta = llt.solve(-b);
          solved = llt.info() == Eigen::Success;
        }
      } else {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                                 Eigen::Lower | Eigen::Upper>
            cg(H);
        cg.setTolerance(1e-12);
        delta = cg.solve(-b);
        solved = cg.info() == Eigen::Success;
      }

      if (!solved) {
        lambda *= 10.0;
        if (lambda > opts.lambda_max) {
          std::string ids;
          for (VertexId id : free_ids) ids += " " + std::to_string(id);
          throw GraphError(
              "optimize: singular normal equations over vertices" + ids);
        }
        continue;
      }

      std::vector<Pose> saved(n);
      for (int i = 0; i < n; ++i) saved[i] = g.vertex(free_ids[i]).pose;
      for (int i = 0; i < n; ++i) {
        Vertex& v = g.vertex(free_ids[i]);
        v.pose = pose_compose(se3_exp(delta.segment<6>(6 * i)), v.pose);
      }
      double trial = partial_chi2(g, active);
      if (trial <= current) {
        current = trial;
        report.chi2_sequence.push_back(current);
        lambda *= 0.5;
        stepped = true;
      } else {
        for (int i = 0; i < n; ++i) g.vertex(free_ids[i]).pose = saved[i];
        lambda *= 10.0;
        if (lambda > opts.lambda_max) {
          // Damping exhausted without an acceptable step: we are at a
          // numerical optimum.
          report.iterations = iter + 1;
          report.final_chi2 = current;
          return report;
        }
      }
    }

    report.iterations = iter + 1;
    double prev = report.final_chi2;
    report.final_chi2 = current;
    if (prev - current <= opts.term_tol * std::max(prev, 1e-300)) break;
  }
  return report;
}

namespace {

void append_double(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), " %.17g", v);
  line += buf;
}

void append_pose(std::string& line, const Pose& p) {
  append_double(line, p.translation().x());
  append_double(line, p.translation().y());
  append_double(line, p.translation().z());
  append_double(line, p.quat().x());
  append_double(line, p.quat().y());
  append_double(line, p.quat().z());
  append_double(line, p.quat().w());
}

}  // namespace

void write_graph_text(std::ostream& os, const Graph& g) {
  for (const auto& [id, v] : g.vertices()) {
    std::string line = "VERTEX " + std::to_string(id);
    append_pose(line, v.pose);
    os << line << '\n';
  }
  for (const Edge& e : g.edges()) {
    std::string line =
        "EDGE " + std::to_string(e.from) + " " + std::to_string(e.to);
    append_pose(line, e.measurement);
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) append_double(line, e.info(i, j));
    os << line << '\n';
  }
}

Graph read_graph_text(std::istream& is) {
  Graph g;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "VERTEX") {
      VertexId id;
      double tx, ty, tz, qx, qy, qz, qw;
      ls >> id >> tx >> ty >> tz >> qx >> qy >> qz >> qw;
      if (!ls) throw GraphError("malformed VERTEX line: " + line);
      VertexId got = g.add_vertex(Pose::from_normalized(
          Eigen::Quaterniond(qw, qx, qy, qz), Vec3(tx, ty, tz)));
      if (got != id) throw GraphError("non-sequential vertex id: " + line);
    } else if (tag == "EDGE") {
      VertexId from, to;
      double tx, ty, tz, qx, qy, qz, qw;
      ls >> from >> to >> tx >> ty >> tz >> qx >> qy >> qz >> qw;
      Mat6 info;
      for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j) {
          double v;
          ls >> v;
          info(i, j) = v;
          info(j, i) = v;
        }
      if (!ls) throw GraphError("malformed EDGE line: " + line);
      g.add_edge(from, to,
                 Pose::from_normalized(Eigen::Quaterniond(qw, qx, qy, qz),
                                       Vec3(tx, ty, tz)),
                 info);
    } else {
      throw GraphError("unknown record: " + line);
    }
  }
  return g;
}

}  // namespace pslam
