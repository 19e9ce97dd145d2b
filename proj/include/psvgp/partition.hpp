#pragma once

#include "psvgp/kernel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace psvgp {

struct BBox {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  bool contains(double x, double y, double tol = 0.0) const {
    return x >= xmin - tol && x <= xmax + tol && y >= ymin - tol && y <= ymax + tol;
  }
};

// One spatial partition: its cell rectangle and the observations inside it.
// Empty partitions are allowed; they train no model.
struct PartitionData {
  std::int64_t id = -1;
  Mat coords;     // n_j x 2
  Vec responses;  // n_j
  BBox bbox;

  Eigen::Index count() const { return coords.rows(); }
};

enum class Adjacency { kEdge, kEdgeCorner };

// Regular nx x ny tiling of the data bounding box. Ids are row-major:
// id = iy * nx + ix. Points on interior cell edges go to the upper cell;
// the last cell is inclusive on its right/top edge.
struct GridLayout {
  int nx = 1, ny = 1;
  BBox domain;
  double cell_w = 0.0, cell_h = 0.0;
  bool wraparound = false;  // first and last column adjacent (periodic x)
  std::vector<PartitionData> partitions;

  int id_of(int ix, int iy) const { return iy * nx + ix; }
  int ix_of(int id) const { return id % nx; }
  int iy_of(int id) const { return id / nx; }
  double domain_width() const { return domain.xmax - domain.xmin; }
};

GridLayout build_grid_partition(const Mat& coords, const Vec& responses, int nx, int ny,
                                bool wraparound = false);

// Partition adjacency plus per-partition observation counts. Stored
// irreflexively; the sampling layer adds self by convention.
struct NeighborGraph {
  std::vector<std::vector<int>> adjacency;  // sorted neighbor ids per partition
  std::vector<Eigen::Index> counts;

  int size() const { return static_cast<int>(adjacency.size()); }
  // n_eff,j = n_j + delta * sum of neighbor counts.
  double effective_count(int j, double delta) const;
};

NeighborGraph neighborhoods(const GridLayout& layout, Adjacency rule = Adjacency::kEdge);

// A probe location on the shared edge of the unordered pair (a, b), a < b.
struct BoundaryProbe {
  double x = 0.0, y = 0.0;
  int a = -1, b = -1;
};

// per_segment probes at fractions (i + 1/2) / per_segment along every shared
// edge segment. Corner-only pairs have no shared segment and produce none.
std::vector<BoundaryProbe> boundary_probes(const GridLayout& layout, int per_segment);

// Map coordinates into partition j's local chart. Identity unless the layout
// wraps, in which case x is shifted by whole domain widths to land nearest
// partition j's cell center.
Mat chart_coords(const GridLayout& layout, int j, const Mat& coords);

// CSV manifest (id, bbox, count) for reproducibility.
void write_partition_manifest(const GridLayout& layout, const std::string& path);

}  // namespace psvgp
