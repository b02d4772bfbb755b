#ifndef PWDESK_KGRID_HPP
#define PWDESK_KGRID_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace pwdesk {

/// Uniform Monkhorst-Pack mesh, fractional coordinates folded into
/// (-1/2, 1/2], uniform weights summing to 1. No symmetry reduction.
struct KMesh {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> weights;
};

/// High-symmetry path through the Brillouin zone. `points` are fractional;
/// cumulative_distance is the arc length in Ang^-1 measured with the
/// reciprocal metric of the cell the path was built for.
struct KPath {
  std::vector<std::string> node_labels;
  std::vector<Eigen::Vector3d> nodes;
  std::vector<Eigen::Vector3d> points;
  std::vector<std::size_t> node_indices;
  std::vector<double> cumulative_distance;

  /// Two-column plot file: distance, energy-free label markers.
  std::string serialize() const;
};

struct KPathNode {
  std::string label;
  Eigen::Vector3d k;
};

KMesh monkhorst_pack(int q1, int q2, int q3);

/// Each segment carries `points_per_segment` points excluding its end node;
/// the final node is appended once. recip: rows b1,b2,b3 (Ang^-1).
KPath kpath(const std::vector<KPathNode>& nodes, int points_per_segment,
            const Eigen::Matrix3d& recip);

/// The deck's path: G - K - M - G for a hexagonal cell.
std::vector<KPathNode> hexagonal_gkmg();

} // namespace pwdesk

#endif
