#pragma once

// Domain types shared by every module: catalog, grid topology, cost
// constants, cache state, and the trace records that drive the clock.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mobcache {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (bad index, negative density, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class OutOfRegionError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class SizeGuardError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Point {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double squared_distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Closed axis-aligned rectangle.
struct Rect {
  double x_min{0.0};
  double y_min{0.0};
  double x_max{0.0};
  double y_max{0.0};

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  Point center() const { return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0}; }

  bool contains(const Point& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }

  // Euclidean distance from p to the rectangle (0 inside).
  double distance_to(const Point& p) const {
    const double dx = std::max({x_min - p.x, 0.0, p.x - x_max});
    const double dy = std::max({y_min - p.y, 0.0, p.y - y_max});
    return std::hypot(dx, dy);
  }

  // Distance from an interior point to the nearest edge.
  double distance_to_edge(const Point& p) const {
    return std::min({p.x - x_min, x_max - p.x, p.y - y_min, y_max - p.y});
  }
};

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

class ContentCatalog {
 public:
  // Unit-size catalog (the common case: every file occupies one slot).
  explicit ContentCatalog(std::size_t file_count)
      : ContentCatalog(std::vector<double>(file_count, 1.0)) {}

  explicit ContentCatalog(std::vector<double> sizes) : sizes_(std::move(sizes)) {
    detail::require(!sizes_.empty(), "catalog must hold at least one file");
    for (double g : sizes_) {
      detail::require(std::isfinite(g) && g > 0.0, "file sizes must be positive");
    }
  }

  std::size_t file_count() const { return sizes_.size(); }
  double size(std::size_t f) const { return sizes_.at(f); }
  const std::vector<double>& sizes() const { return sizes_; }

 private:
  std::vector<double> sizes_;
};

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

enum class NeighborMode {
  kGrid8,  // grid-adjacent cells including diagonals
  kFull,   // every other SBS is in the intra-cell domain
};

// Uniform grid of cells over a rectangular region, one SBS at each cell
// center. Cell index = row * cols + col, rows counted from y_min upward.
class NetworkTopology {
 public:
  static NetworkTopology grid(std::size_t cols, std::size_t rows, Rect region,
                              NeighborMode mode = NeighborMode::kGrid8) {
    detail::require(cols >= 1 && rows >= 1, "grid needs at least one cell");
    detail::require(region.width() > 0.0 && region.height() > 0.0,
                    "region must have positive area");
    NetworkTopology topo;
    topo.cols_ = cols;
    topo.rows_ = rows;
    topo.region_ = region;
    topo.mode_ = mode;
    const std::size_t k_count = cols * rows;
    topo.positions_.reserve(k_count);
    topo.neighbors_.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      topo.positions_.push_back(topo.cell_rect(k).center());
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto [ck, rk] = topo.coords(k);
      for (std::size_t l = 0; l < k_count; ++l) {
        if (l == k) continue;
        const auto [cl, rl] = topo.coords(l);
        const bool adjacent = (ck > cl ? ck - cl : cl - ck) <= 1 &&
                              (rk > rl ? rk - rl : rl - rk) <= 1;
        if (mode == NeighborMode::kFull || adjacent) topo.neighbors_[k].push_back(l);
      }
    }
    return topo;
  }

  std::size_t sbs_count() const { return cols_ * rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t rows() const { return rows_; }
  const Rect& region() const { return region_; }
  NeighborMode neighbor_mode() const { return mode_; }
  bool mbs_present() const { return true; }

  const Point& sbs_position(std::size_t k) const { return positions_.at(k); }
  const std::vector<Point>& sbs_positions() const { return positions_; }
  const std::vector<std::size_t>& neighbors(std::size_t k) const { return neighbors_.at(k); }

  bool are_neighbors(std::size_t k, std::size_t l) const {
    const auto& n = neighbors_.at(k);
    return std::binary_search(n.begin(), n.end(), l);
  }

  double cell_width() const { return region_.width() / static_cast<double>(cols_); }
  double cell_height() const { return region_.height() / static_cast<double>(rows_); }

  std::pair<std::size_t, std::size_t> coords(std::size_t k) const {
    return {k % cols_, k / cols_};
  }

  Rect cell_rect(std::size_t k) const {
    detail::require(k < sbs_count(), "cell index out of range");
    const auto [c, r] = coords(k);
    const double w = cell_width();
    const double h = cell_height();
    // Edges of the last row/column snap to the region bound exactly.
    const double x1 = c + 1 == cols_ ? region_.x_max : region_.x_min + w * (c + 1);
    const double y1 = r + 1 == rows_ ? region_.y_max : region_.y_min + h * (r + 1);
    return {region_.x_min + w * c, region_.y_min + h * r, x1, y1};
  }

  // Grid cell containing p. Points on an interior grid line belong to the
  // cell with the lower coordinate index.
  std::size_t assign_cell(const Point& p) const {
    if (!region_.contains(p)) {
      throw OutOfRegionError(
          detail::concat("position (", p.x, ", ", p.y, ") lies outside the region"));
    }
    const auto axis = [](double v, double lo, double step, std::size_t n) {
      const double t = (v - lo) / step;
      const double idx = std::ceil(t) - 1.0;
      if (idx <= 0.0) return std::size_t{0};
      return std::min(static_cast<std::size_t>(idx), n - 1);
    };
    const std::size_t c = axis(p.x, region_.x_min, cell_width(), cols_);
    const std::size_t r = axis(p.y, region_.y_min, cell_height(), rows_);
    return r * cols_ + c;
  }

 private:
  NetworkTopology() = default;

  std::size_t cols_{0};
  std::size_t rows_{0};
  Rect region_{};
  NeighborMode mode_{NeighborMode::kGrid8};
  std::vector<Point> positions_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

inline std::size_t assign_cell(const Point& position, const NetworkTopology& topology) {
  return topology.assign_cell(position);
}

// ---------------------------------------------------------------------------
// Costs
// ---------------------------------------------------------------------------

// Cost constants of the network objective. Defaults are the reference
// system values (mW-denominated cost units).
struct CostParams {
  double cache_cost{1.5};       // per cached file, scaled by the file size
  double sbs_retrieval{180.0};  // per unit of demand served by a caching SBS
  double mbs_base{13.0};        // backhaul retrieval through the MBS
  double mbs_link{370.0};       // SBS <-> MBS link

  double worst_case() const { return mbs_base + mbs_link; }

  void validate() const {
    for (double v : {cache_cost, sbs_retrieval, mbs_base, mbs_link}) {
      detail::require(std::isfinite(v) && v >= 0.0, "cost constants must be non-negative");
    }
  }
};

// ---------------------------------------------------------------------------
// Cache state
// ---------------------------------------------------------------------------

// Binary K x M placement with per-SBS capacity accounting. Every mutation
// re-checks the capacity constraint, so a CacheMatrix is always feasible.
class CacheMatrix {
 public:
  CacheMatrix(const ContentCatalog& catalog, std::vector<double> capacities)
      : sizes_(catalog.sizes()),
        capacities_(std::move(capacities)),
        used_(capacities_.size(), 0.0),
        bits_(capacities_.size() * sizes_.size(), 0) {
    detail::require(!capacities_.empty(), "cache needs at least one SBS");
    for (double c : capacities_) {
      detail::require(std::isfinite(c) && c >= 0.0, "capacities must be non-negative");
    }
  }

  std::size_t sbs_count() const { return capacities_.size(); }
  std::size_t file_count() const { return sizes_.size(); }
  double capacity(std::size_t k) const { return capacities_.at(k); }
  const std::vector<double>& capacities() const { return capacities_; }
  double used(std::size_t k) const { return used_.at(k); }

  bool cached(std::size_t k, std::size_t f) const { return bits_[index(k, f)] != 0; }

  bool fits(std::size_t k, std::size_t f) const {
    return used_.at(k) + sizes_.at(f) <= capacities_[k] + kSlack;
  }

  // Returns false (and leaves the matrix untouched) when f does not fit.
  bool try_set(std::size_t k, std::size_t f) {
    const std::size_t i = index(k, f);
    if (bits_[i]) return true;
    if (!fits(k, f)) return false;
    bits_[i] = 1;
    used_[k] += sizes_[f];
    return true;
  }

  void set(std::size_t k, std::size_t f) {
    if (!try_set(k, f)) {
      throw CapacityError(detail::concat("caching file ", f, " at SBS ", k,
                                         " exceeds its capacity ", capacities_[k]));
    }
  }

  void clear(std::size_t k, std::size_t f) {
    const std::size_t i = index(k, f);
    if (!bits_[i]) return;
    bits_[i] = 0;
    used_[k] = std::max(0.0, used_[k] - sizes_[f]);
  }

  std::size_t cached_count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
  }

  // Number of SBSs holding file f.
  std::size_t copies(std::size_t f) const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < sbs_count(); ++k) n += cached(k, f);
    return n;
  }

  std::vector<std::size_t> files_at(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < file_count(); ++f) {
      if (cached(k, f)) out.push_back(f);
    }
    return out;
  }

  // Row-major 0/1 entries, useful for lexicographic comparisons.
  const std::vector<std::uint8_t>& entries() const { return bits_; }

  // Recomputes occupancy from scratch and checks binarity and capacity.
  bool satisfies_constraints() const {
    for (std::size_t k = 0; k < sbs_count(); ++k) {
      double total = 0.0;
      for (std::size_t f = 0; f < file_count(); ++f) {
        const auto b = bits_[index(k, f)];
        if (b > 1) return false;
        total += b * sizes_[f];
      }
      if (total > capacities_[k] + kSlack) return false;
    }
    return true;
  }

  friend bool operator==(const CacheMatrix& a, const CacheMatrix& b) {
    return a.bits_ == b.bits_ && a.capacities_ == b.capacities_;
  }

 private:
  static constexpr double kSlack = 1e-9;

  std::size_t index(std::size_t k, std::size_t f) const {
    detail::require(k < sbs_count() && f < file_count(), "cache index out of range");
    return k * sizes_.size() + f;
  }

  std::vector<double> sizes_;
  std::vector<double> capacities_;
  std::vector<double> used_;
  std::vector<std::uint8_t> bits_;
};

inline double occupancy(const CacheMatrix& cache, const ContentCatalog& catalog, std::size_t k) {
  detail::require(k < cache.sbs_count(), "SBS index out of range");
  double total = 0.0;
  for (std::size_t f = 0; f < catalog.file_count(); ++f) {
    if (cache.cached(k, f)) total += catalog.size(f);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Trace records
// ---------------------------------------------------------------------------

using UserId = std::int64_t;

// File indices are 0-based in memory; canonical text files use 1-based ids.
struct RequestEvent {
  std::size_t slot{0};
  UserId user{0};
  std::size_t file{0};

  friend bool operator==(const RequestEvent&, const RequestEvent&) = default;
};

struct MobilitySample {
  std::size_t slot{0};
  UserId user{0};
  Point position{};

  friend bool operator==(const MobilitySample&, const MobilitySample&) = default;
};

// Dense row-major K x M table of non-negative reals (densities, counts).
class DensityTable {
 public:
  DensityTable() = default;
  DensityTable(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t k, std::size_t f) { return data_[k * cols_ + f]; }
  double operator()(std::size_t k, std::size_t f) const { return data_[k * cols_ + f]; }
  const std::vector<double>& data() const { return data_; }

  double row_sum(std::size_t k) const {
    return std::accumulate(data_.begin() + k * cols_, data_.begin() + (k + 1) * cols_, 0.0);
  }
  double col_sum(std::size_t f) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rows_; ++k) s += (*this)(k, f);
    return s;
  }

 private:
  std::size_t rows_{0};
  std::size_t cols_{0};
  std::vector<double> data_;
};

}  // namespace mobcache
