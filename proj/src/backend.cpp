#include "pslam/backend.hpp"

#include "pslam/io.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <fstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace pslam {

namespace {

// Hop distances from start over undirected edges; missing = unreachable.
std::unordered_map<VertexId, int> hop_distances(const Graph& g,
                                                VertexId start) {
  std::unordered_map<VertexId, std::vector<VertexId>> adj;
  for (const Edge& e : g.edges()) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::unordered_map<VertexId, int> dist;
  dist[start] = 0;
  std::deque<VertexId> queue{start};
  while (!queue.empty()) {
    VertexId id = queue.front();
    queue.pop_front();
    for (VertexId nb : adj[id]) {
      if (dist.emplace(nb, dist[id] + 1).second) queue.push_back(nb);
    }
  }
  return dist;
}

std::unordered_set<VertexId> component_of(const Graph& g, VertexId start) {
  auto dist = hop_distances(g, start);
  std::unordered_set<VertexId> out;
  for (const auto& [id, d] : dist) out.insert(id);
  return out;
}

}  // namespace

std::vector<Edge> find_loop_closures(const Graph& g, VertexId new_vertex,
                                     const BackendConfig& cfg) {
  std::vector<Edge> out;
  const Vertex& nv = g.vertex(new_vertex);
  if (nv.keyframe.fits.size() < 4) return out;

  auto hops = hop_distances(g, new_vertex);

  struct Candidate {
    VertexId id;
    double dist;
  };
  std::vector<Candidate> candidates;
  for (const auto& [id, v] : g.vertices()) {
    if (id == new_vertex) continue;
    double dist = (v.pose.translation() - nv.pose.translation()).norm();
    if (dist > cfg.closure_search_radius) continue;
    auto it = hops.find(id);
    // Unreachable vertices (another component) always qualify.
    if (it != hops.end() && it->second < cfg.min_graph_separation) continue;
    if (v.keyframe.fits.size() < 4) continue;
    candidates.push_back({id, dist});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
            });
  if (int(candidates.size()) > cfg.max_closure_candidates)
    candidates.resize(std::size_t(cfg.max_closure_candidates));

  for (const Candidate& c : candidates) {
    const Vertex& cand = g.vertex(c.id);
    Pose T0 = pose_compose(pose_inverse(cand.pose), nv.pose);
    try {
      AlignmentResult res =
          align_clouds(nv.keyframe, cand.keyframe, T0, cfg.icap);
      if (!res.converged || res.residual >= cfg.closure_residual_max) continue;
      Edge e;
      e.from = c.id;
      e.to = new_vertex;
      e.measurement = res.T;
      e.info = alignment_information(res, cfg.info);
      e.kind = EdgeKind::loop_closure;
      out.push_back(e);
    } catch (const AlignmentError&) {
      // Disjoint or degenerate content: candidate rejected.
    }
  }
  return out;
}

BackendCore::BackendCore(BackendConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.valid()) throw std::invalid_argument("backend: bad config");
}

AgentSession& BackendCore::session(std::uint32_t agent_id) {
  auto [it, inserted] = sessions_.try_emplace(agent_id);
  if (inserted) it->second.agent_id = agent_id;
  return it->second;
}

void BackendCore::weld_components(const Edge& closure) {
  auto from_comp = component_of(graph_, closure.from);
  if (from_comp.count(closure.to)) return;  // already one component
  auto to_comp = component_of(graph_, closure.to);

  // Re-base the younger component (larger smallest id) onto the older one.
  VertexId from_min = *std::min_element(from_comp.begin(), from_comp.end());
  VertexId to_min = *std::min_element(to_comp.begin(), to_comp.end());
  bool rebase_to = to_min > from_min;
  const auto& moving = rebase_to ? to_comp : from_comp;

  const Pose& pf = graph_.vertex(closure.from).pose;
  const Pose& pt = graph_.vertex(closure.to).pose;
  // Choose G so that after pose <- G * pose on the moving side,
  // pose_from^-1 * pose_to equals the measured closure transform.
  Pose G = rebase_to
               ? pose_compose(pose_compose(pf, closure.measurement),
                              pose_inverse(pt))
               : pose_compose(pose_compose(pt, pose_inverse(closure.measurement)),
                              pose_inverse(pf));

  for (VertexId id : moving) {
    Vertex& v = graph_.vertex(id);
    v.pose = pose_compose(G, v.pose);
    if (v.fixed && graph_.vertex_count() > moving.size()) v.fixed = false;
  }
  for (auto& [agent_id, s] : sessions_) {
    if (s.started && moving.count(s.first_vertex)) {
      s.frame_offset = pose_compose(G, s.frame_offset);
      s.welded = true;
    }
  }
}

IngestReport BackendCore::ingest(
    const KeyframeMessage& msg,
    const std::function<void(VertexId)>& on_integrated) {
  IngestReport report;
  AgentSession& s = session(msg.agent_id);

  if (s.started && msg.frame_id <= s.last_frame_id) {
    report.resync = true;
    return report;
  }

  PlaneCloud cloud = msg.cloud;
  cloud.frame_id = msg.frame_id;
  cloud.timestamp = msg.timestamp;

  VertexId v;
  if (!s.started) {
    // First keyframe of this agent: anchor its chain at the frame offset
    // (identity until a closure welds it elsewhere).
    v = graph_.add_vertex(s.frame_offset, std::move(cloud));
    if (graph_.vertex(v).id != 0) {
      // Later agents fix their own anchor until welded into the global
      // component, keeping one anchor per component.
      graph_.set_fixed(v, true);
    }
    s.first_vertex = v;
    s.started = true;
  } else {
    Pose pose =
        pose_compose(graph_.vertex(s.last_vertex).pose, msg.relative_pose);
    v = graph_.add_vertex(pose, std::move(cloud));
    graph_.add_edge(s.last_vertex, v, msg.relative_pose, msg.info,
                    EdgeKind::odometry);
  }
  s.last_vertex = v;
  s.last_frame_id = msg.frame_id;
  report.accepted = true;
  report.vertex = v;
  ++accepted_since_optimize_;

  if (on_integrated) on_integrated(v);

  std::vector<Edge> closures = find_loop_closures(graph_, v, cfg_);
  for (const Edge& e : closures) {
    weld_components(e);
    graph_.add_edge(e.from, e.to, e.measurement, e.info, e.kind);
  }
  report.closures_added = int(closures.size());

  if (post_integrate_hook) post_integrate_hook();

  if (!closures.empty() || accepted_since_optimize_ >= cfg_.optimize_every) {
    optimize(graph_, cfg_.optimize);
    accepted_since_optimize_ = 0;
    report.optimized = true;
  }
  return report;
}

namespace {

constexpr std::uint8_t kCloudsMagic[4] = {'P', 'C', 'L', 'D'};

template <typename T>
void put_raw(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T take_raw(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size())
    throw IoError("truncated clouds file");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void export_map(const Graph& g, const std::filesystem::path& prefix,
                const CameraIntrinsics& intr) {
  {
    std::ofstream os(prefix.string() + ".graph");
    if (!os) throw IoError("cannot write graph: " + prefix.string());
    write_graph_text(os, g);
  }
  {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kCloudsMagic, kCloudsMagic + 4);
    put_raw(out, std::uint16_t(1));  // version
    put_raw(out, std::uint16_t(0));
    put_raw(out, std::uint64_t(g.vertex_count()));
    for (const auto& [id, v] : g.vertices()) {
      put_raw(out, std::uint64_t(id));
      put_raw(out, v.keyframe.frame_id);
      put_raw(out, v.keyframe.timestamp);
      std::vector<std::uint8_t> cloud = encode_cloud(v.keyframe);
      out.insert(out.end(), cloud.begin(), cloud.end());
    }
    write_file_bytes(prefix.string() + ".clouds", out);
  }
  write_preview_xyz(g, intr, prefix.string() + ".xyz");
}

Graph import_map(const std::filesystem::path& prefix) {
  Graph g;
  {
    std::ifstream is(prefix.string() + ".graph");
    if (!is) throw IoError("cannot read graph: " + prefix.string());
    g = read_graph_text(is);
  }
  std::vector<std::uint8_t> bytes =
      read_file_bytes(prefix.string() + ".clouds");
  std::size_t pos = 0;
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCloudsMagic, 4) != 0)
    throw IoError("bad clouds file magic");
  pos = 4;
  std::uint16_t version = take_raw<std::uint16_t>(bytes, pos);
  if (version != 1) throw IoError("unsupported clouds file version");
  take_raw<std::uint16_t>(bytes, pos);
  std::uint64_t count = take_raw<std::uint64_t>(bytes, pos);
  for (std::uint64_t i = 0; i < count; ++i) {
    VertexId id = take_raw<std::uint64_t>(bytes, pos);
    std::uint64_t frame_id = take_raw<std::uint64_t>(bytes, pos);
    double timestamp = take_raw<double>(bytes, pos);
    if (pos + 4 > bytes.size()) throw IoError("truncated clouds file");
    std::uint32_t fits;
    std::memcpy(&fits, bytes.data() + pos, 4);
    std::size_t len = cloud_encoded_size(fits);
    if (pos + len > bytes.size()) throw IoError("truncated clouds file");
    PlaneCloud cloud = decode_cloud(
        std::span<const std::uint8_t>(bytes.data() + pos, len));
    pos += len;
    cloud.frame_id = frame_id;
    cloud.timestamp = timestamp;
    if (!g.has_vertex(id)) throw IoError("clouds file names unknown vertex");
    g.vertex(id).keyframe = std::move(cloud);
  }
  return g;
}

void write_preview_xyz(const Graph& g, const CameraIntrinsics& intr,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write preview: " + path.string());
  char line[128];
  for (const auto& [id, v] : g.vertices()) {
    for (const PlaneFit& f : v.keyframe.fits) {
      const TileRect& t = f.tile;
      const double cs[4][2] = {
          {double(t.x), double(t.y)},
          {double(t.x + t.w - 1), double(t.y)},
          {double(t.x), double(t.y + t.h - 1)},
          {double(t.x + t.w - 1), double(t.y + t.h - 1)}};
      for (const auto& c : cs) {
        // Corner ray intersected with the fitted plane gives the depth.
        Vec3 dir(intr.tan_x(c[0]), intr.tan_y(c[1]), 1.0);
        double denom = f.plane.n.dot(dir);
        if (std::abs(denom) < 1e-9) continue;
        double z = -f.plane.d / denom;
        if (z <= 0.0) continue;
        Vec3 world = v.pose.apply(z * dir);
        std::snprintf(line, sizeof(line), "%.6f %.6f %.6f\n", world.x(),
                      world.y(), world.z());
        os << line;
      }
    }
  }
}

void BackendService::handle_connection(ByteStream& stream) {
  FrameReader reader(stream);
  while (auto frame = reader.next()) {
    if (frame->type != MsgType::keyframe) continue;
    KeyframeMessage msg;
    try {
      msg = decode_keyframe_message(frame->payload);
    } catch (const DecodeError&) {
      continue;  // message rejected, session intact
    }
    std::scoped_lock lk(mu_);
    IngestReport report = core_.ingest(msg, [&](VertexId vertex) {
      AckMessage ack{msg.agent_id, msg.frame_id,
                     core_.graph().vertex(vertex).pose};
      frame_message(stream, MsgType::ack, encode_ack(ack));
    });
    if (report.resync) {
      AgentSession& s = core_.session(msg.agent_id);
      frame_message(stream, MsgType::resync,
                    encode_resync({msg.agent_id, s.last_frame_id}));
    }
  }
  sessions_closed_.fetch_add(1);
}

void BackendService::serve(TcpListener& listener, int exit_after_sessions) {
  std::vector<std::thread> workers;
  std::atomic<bool> done{false};
  std::thread reaper;
  if (exit_after_sessions > 0) {
    reaper = std::thread([&] {
      while (sessions_closed_.load() < exit_after_sessions && !done.load())
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      listener.close();
    });
  }
  while (auto conn = listener.accept()) {
    workers.emplace_back(
        [this, stream = std::shared_ptr<TcpStream>(conn.release())] {
          try {
            handle_connection(*stream);
          } catch (const std::exception&) {
            sessions_closed_.fetch_add(1);
          }
        });
  }
  for (auto& w : workers) w.join();
  done.store(true);
  if (reaper.joinable()) reaper.join();
}

}  // namespace pslam
