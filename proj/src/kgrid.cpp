#include "pwdesk/kgrid.hpp"
#include "pwdesk/error.hpp"

#include <cmath>
#include <cstdio>

namespace pwdesk {

namespace {

double fold_half(double u) {
  // into (-1/2, 1/2]
  double y = u - std::round(u);
  if (y <= -0.5) y += 1.0;
  return y;
}

} // namespace

KMesh monkhorst_pack(int q1, int q2, int q3) {
  const int q[3] = {q1, q2, q3};
  for (int i = 0; i < 3; ++i)
    if (q[i] < 1) throw InputError("Monkhorst-Pack divisions must be >= 1");
  KMesh mesh;
  const double w = 1.0 / (double(q1) * q2 * q3);
  for (int r1 = 1; r1 <= q1; ++r1)
    for (int r2 = 1; r2 <= q2; ++r2)
      for (int r3 = 1; r3 <= q3; ++r3) {
        Eigen::Vector3d u{(2.0 * r1 - q1 - 1.0) / (2.0 * q1),
                          (2.0 * r2 - q2 - 1.0) / (2.0 * q2),
                          (2.0 * r3 - q3 - 1.0) / (2.0 * q3)};
        for (int i = 0; i < 3; ++i) u[i] = fold_half(u[i]);
        mesh.points.push_back(u);
        mesh.weights.push_back(w);
      }
  return mesh;
}

KPath kpath(const std::vector<KPathNode>& nodes, int points_per_segment,
            const Eigen::Matrix3d& recip) {
  if (nodes.size() < 2) throw InputError("k-path needs at least two nodes");
  if (points_per_segment < 1)
    throw InputError("points_per_segment must be >= 1");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if ((nodes[i].k - nodes[i - 1].k).norm() < 1e-14)
      throw InputError("degenerate k-path segment at node " +
                       std::to_string(i));

  KPath path;
  for (const auto& n : nodes) {
    path.node_labels.push_back(n.label);
    path.nodes.push_back(n.k);
  }
  for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
    path.node_indices.push_back(path.points.size());
    for (int j = 0; j < points_per_segment; ++j) {
      double t = double(j) / points_per_segment;
      path.points.push_back(nodes[s].k + t * (nodes[s + 1].k - nodes[s].k));
    }
  }
  path.node_indices.push_back(path.points.size());
  path.points.push_back(nodes.back().k);

  path.cumulative_distance.resize(path.points.size(), 0.0);
  for (std::size_t i = 1; i < path.points.size(); ++i) {
    Eigen::Vector3d dk = recip.transpose() * (path.points[i] - path.points[i - 1]);
    path.cumulative_distance[i] = path.cumulative_distance[i - 1] + dk.norm();
  }
  return path;
}

std::string KPath::serialize() const {
  std::string out;
  char buf[96];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::string label;
    for (std::size_t n = 0; n < node_indices.size(); ++n)
      if (node_indices[n] == i) label = node_labels[n];
    std::snprintf(buf, sizeof buf, "%.10f\t%s\n", cumulative_distance[i],
                  label.c_str());
    out += buf;
  }
  return out;
}

std::vector<KPathNode> hexagonal_gkmg() {
  return {{"G", {0.0, 0.0, 0.0}},
          {"K", {1.0 / 3.0, 1.0 / 3.0, 0.0}},
          {"M", {0.0, 0.5, 0.0}},
          {"G", {0.0, 0.0, 0.0}}};
}

} // namespace pwdesk
