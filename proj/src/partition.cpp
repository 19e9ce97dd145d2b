#include "psvgp/partition.hpp"

#include "psvgp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace psvgp {

GridLayout build_grid_partition(const Mat& coords, const Vec& responses, int nx, int ny,
                                bool wraparound) {
  if (nx < 1 || ny < 1) throw ConfigError("build_grid_partition: nx, ny must be >= 1");
  if (coords.cols() != 2) throw ConfigError("build_grid_partition: coordinates must be 2-d");
  if (coords.rows() != responses.size()) {
    throw ConfigError("build_grid_partition: coordinate/response count mismatch");
  }

  GridLayout layout;
  layout.nx = nx;
  layout.ny = ny;
  layout.wraparound = wraparound;

  const Eigen::Index n = coords.rows();
  BBox box;
  if (n > 0) {
    box.xmin = coords.col(0).minCoeff();
    box.xmax = coords.col(0).maxCoeff();
    box.ymin = coords.col(1).minCoeff();
    box.ymax = coords.col(1).maxCoeff();
  }
  layout.domain = box;
  layout.cell_w = (box.xmax - box.xmin) / nx;
  layout.cell_h = (box.ymax - box.ymin) / ny;

  auto cell_index = [](double v, double lo, double width, int cells) {
    if (width <= 0.0) return 0;
    int i = static_cast<int>(std::floor((v - lo) / width));
    return std::clamp(i, 0, cells - 1);  // right/top edge joins the last cell
  };

  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(nx) * ny);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ix = cell_index(coords(i, 0), box.xmin, layout.cell_w, nx);
    const int iy = cell_index(coords(i, 1), box.ymin, layout.cell_h, ny);
    members[static_cast<std::size_t>(layout.id_of(ix, iy))].push_back(i);
  }

  layout.partitions.resize(members.size());
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const int id = layout.id_of(ix, iy);
      PartitionData& p = layout.partitions[static_cast<std::size_t>(id)];
      p.id = id;
      p.bbox = BBox{box.xmin + ix * layout.cell_w, box.ymin + iy * layout.cell_h,
                    box.xmin + (ix + 1) * layout.cell_w, box.ymin + (iy + 1) * layout.cell_h};
      const auto& idx = members[static_cast<std::size_t>(id)];
      p.coords.resize(static_cast<Eigen::Index>(idx.size()), 2);
      p.responses.resize(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        p.coords.row(static_cast<Eigen::Index>(k)) = coords.row(idx[k]);
        p.responses[static_cast<Eigen::Index>(k)] = responses[idx[k]];
      }
    }
  }
  return layout;
}

double NeighborGraph::effective_count(int j, double delta) const {
  double n_eff = static_cast<double>(counts[static_cast<std::size_t>(j)]);
  for (int k : adjacency[static_cast<std::size_t>(j)]) {
    n_eff += delta * static_cast<double>(counts[static_cast<std::size_t>(k)]);
  }
  return n_eff;
}

NeighborGraph neighborhoods(const GridLayout& layout, Adjacency rule) {
  const int nx = layout.nx, ny = layout.ny;
  NeighborGraph graph;
  graph.adjacency.resize(layout.partitions.size());
  graph.counts.resize(layout.partitions.size());
  for (const PartitionData& p : layout.partitions) {
    graph.counts[static_cast<std::size_t>(p.id)] = p.count();
  }

  auto wrap_ix = [&](int ix) -> int {
    if (0 <= ix && ix < nx) return ix;
    if (!layout.wraparound || nx < 2) return -1;
    return (ix + nx) % nx;
  };

  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const int j = layout.id_of(ix, iy);
      std::set<int> nbrs;
      auto add = [&](int dx, int dy) {
        const int ax = wrap_ix(ix + dx);
        const int ay = iy + dy;
        if (ax < 0 || ay < 0 || ay >= ny) return;
        const int k = layout.id_of(ax, ay);
        if (k != j) nbrs.insert(k);
      };
      add(-1, 0);
      add(1, 0);
      add(0, -1);
      add(0, 1);
      if (rule == Adjacency::kEdgeCorner) {
        add(-1, -1);
        add(-1, 1);
        add(1, -1);
        add(1, 1);
      }
      graph.adjacency[static_cast<std::size_t>(j)].assign(nbrs.begin(), nbrs.end());
    }
  }
  return graph;
}

std::vector<BoundaryProbe> boundary_probes(const GridLayout& layout, int per_segment) {
  if (per_segment < 1) throw ConfigError("boundary_probes: per_segment must be >= 1");
  const int nx = layout.nx, ny = layout.ny;
  std::vector<BoundaryProbe> probes;

  auto fraction = [&](int i) { return (i + 0.5) / per_segment; };
  auto emit = [&](double x, double y, int a, int b) {
    BoundaryProbe p;
    p.x = x;
    p.y = y;
    p.a = std::min(a, b);
    p.b = std::max(a, b);
    probes.push_back(p);
  };

  // Vertical edges between horizontal neighbors.
  for (int iy = 0; iy < ny; ++iy) {
    const double y0 = layout.domain.ymin + iy * layout.cell_h;
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const double x = layout.domain.xmin + (ix + 1) * layout.cell_w;
      for (int i = 0; i < per_segment; ++i) {
        emit(x, y0 + fraction(i) * layout.cell_h, layout.id_of(ix, iy), layout.id_of(ix + 1, iy));
      }
    }
    if (layout.wraparound && nx > 1) {
      // Seam between the last and first column, placed at the left domain edge.
      for (int i = 0; i < per_segment; ++i) {
        emit(layout.domain.xmin, y0 + fraction(i) * layout.cell_h, layout.id_of(nx - 1, iy),
             layout.id_of(0, iy));
      }
    }
  }
  // Horizontal edges between vertical neighbors.
  for (int iy = 0; iy + 1 < ny; ++iy) {
    const double y = layout.domain.ymin + (iy + 1) * layout.cell_h;
    for (int ix = 0; ix < nx; ++ix) {
      const double x0 = layout.domain.xmin + ix * layout.cell_w;
      for (int i = 0; i < per_segment; ++i) {
        emit(x0 + fraction(i) * layout.cell_w, y, layout.id_of(ix, iy), layout.id_of(ix, iy + 1));
      }
    }
  }
  return probes;
}

Mat chart_coords(const GridLayout& layout, int j, const Mat& coords) {
  if (!layout.wraparound) return coords;
  const double width = layout.domain_width();
  if (width <= 0.0) return coords;
  const double cx = layout.domain.xmin + (layout.ix_of(j) + 0.5) * layout.cell_w;
  Mat out = coords;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out(i, 0) += width * std::round((cx - out(i, 0)) / width);
  }
  return out;
}

void write_partition_manifest(const GridLayout& layout, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "id,xmin,ymin,xmax,ymax,count\n";
  out.precision(17);
  for (const PartitionData& p : layout.partitions) {
    out << p.id << ',' << p.bbox.xmin << ',' << p.bbox.ymin << ',' << p.bbox.xmax << ','
        << p.bbox.ymax << ',' << p.count() << '\n';
  }
}

}  // namespace psvgp
