#pragma once

#include "pslam/icap.hpp"
#include "pslam/net.hpp"
#include "pslam/pose_graph.hpp"
#include "pslam/wire.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>

namespace pslam {

struct BackendConfig {
  double closure_search_radius = 2.0;  // meters
  int min_graph_separation = 10;       // hops
  double closure_residual_max = 1e-3;  // on the ICaP coefficient residual
  int optimize_every = 5;              // accepted messages between optimizes
  int max_closure_candidates = 5;
  IcapParams icap;
  InformationParams info;
  OptimizeOptions optimize;
  CameraIntrinsics preview_intrinsics{525.0, 525.0, 320.0, 240.0,
                                      0.5,   0.5,   640,   480};

  bool valid() const {
    return closure_search_radius > 0.0 && min_graph_separation >= 2 &&
           optimize_every >= 1 && max_closure_candidates >= 1;
  }
};

/// Per-agent ingest state. Each agent's chain starts anchored at identity
/// in its own frame; the first validated closure against another component
/// welds it into the global frame and records the offset here.
struct AgentSession {
  std::uint32_t agent_id = 0;
  bool started = false;
  std::uint64_t last_frame_id = 0;
  VertexId last_vertex = 0;
  VertexId first_vertex = 0;
  Pose frame_offset;
  bool welded = false;
};

struct IngestReport {
  bool accepted = false;
  bool resync = false;  // out-of-order frame id; ask the agent to resync
  VertexId vertex = 0;
  int closures_added = 0;
  bool optimized = false;
};

/// Validated loop-closure candidates for a freshly integrated vertex:
/// vertices inside the search radius but at least min_graph_separation
/// hops away (or in another component), confirmed by ICaP.
std::vector<Edge> find_loop_closures(const Graph& g, VertexId new_vertex,
                                     const BackendConfig& cfg);

/// Single-writer integration core; all graph mutation funnels through
/// ingest. Thread safety is the caller's job (BackendService serializes).
class BackendCore {
 public:
  explicit BackendCore(BackendConfig cfg);

  /// Integrates one message. `on_integrated` fires right after the vertex
  /// and odometry edge are in place, before closure search and any
  /// optimization, so acknowledgments are never delayed by optimize time.
  IngestReport ingest(const KeyframeMessage& msg,
                      const std::function<void(VertexId)>& on_integrated = {});

  Graph& graph() { return graph_; }
  const Graph& graph() const { return graph_; }
  const std::map<std::uint32_t, AgentSession>& sessions() const {
    return sessions_;
  }
  AgentSession& session(std::uint32_t agent_id);
  const BackendConfig& config() const { return cfg_; }

  /// Test hook, invoked after the ack point where optimization would run.
  std::function<void()> post_integrate_hook;

 private:
  void weld_components(const Edge& closure);

  BackendConfig cfg_;
  Graph graph_;
  std::map<std::uint32_t, AgentSession> sessions_;
  std::int64_t accepted_since_optimize_ = 0;
};

/// Writes <prefix>.graph (text), <prefix>.clouds (binary keyframe clouds)
/// and <prefix>.xyz (world-frame tile-corner preview points).
void export_map(const Graph& g, const std::filesystem::path& prefix,
                const CameraIntrinsics& intr);

/// Inverse of export_map's .graph/.clouds pair.
Graph import_map(const std::filesystem::path& prefix);

/// Regenerates the .xyz preview from an exported map.
void write_preview_xyz(const Graph& g, const CameraIntrinsics& intr,
                       const std::filesystem::path& path);

/// TCP server: one thread per connection, all ingests serialized through
/// the core mutex. Each keyframe message is acknowledged (with the current
/// pose estimate) before any optimization it triggers runs.
class BackendService {
 public:
  explicit BackendService(BackendConfig cfg) : core_(std::move(cfg)) {}

  /// Accept loop; returns when the listener is closed or, if
  /// exit_after_sessions > 0, once that many sessions have come and gone.
  void serve(TcpListener& listener, int exit_after_sessions = 0);

  /// Serves one established connection on the calling thread.
  void handle_connection(ByteStream& stream);

  BackendCore& core() { return core_; }
  std::mutex& core_mutex() { return mu_; }

 private:
  BackendCore core_;
  std::mutex mu_;
  std::atomic<int> sessions_closed_{0};
};

}  // namespace pslam
