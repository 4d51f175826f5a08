#pragma once

// 2D occupancy grid: the planner's collision oracle. Cells are half-open
// squares [x0, x0+res) x [y0, y0+res), so every point belongs to exactly one
// cell and points on a boundary fall into the higher-index cell. Ray marking
// and segment queries both use supercover traversal (every touched cell, no
// diagonal corner cutting).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sbamp/errors.hpp"
#include "sbamp/geometry.hpp"
#include "sbamp/rng.hpp"

namespace sbamp {

enum class Cell : uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct CellIndex {
  int x = 0;
  int y = 0;
  bool operator==(const CellIndex&) const = default;
};

/// All cells touched by segment ab, in traversal order from a to b,
/// in cell coordinates relative to `origin` with cell size `resolution`.
/// Cells outside any particular grid are still reported; callers clip.
std::vector<CellIndex> supercover_cells(Vec2 a, Vec2 b, double resolution, Vec2 origin);

struct RangeScan {
  Vec2 position;
  double heading = 0.0;
  std::vector<double> angles;  // beam angles relative to heading
  std::vector<double> ranges;  // measured distance per beam
  double max_range = 10.0;
};

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(double resolution, Vec2 origin, int width, int height,
                Cell fill = Cell::Unknown, double inflation_radius = 0.0);

  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double inflation_radius() const { return inflation_radius_; }
  void set_inflation_radius(double r) { inflation_radius_ = r; }

  bool in_bounds(int cx, int cy) const {
    return cx >= 0 && cy >= 0 && cx < width_ && cy < height_;
  }
  bool in_bounds(const Vec2& p) const;

  CellIndex world_to_cell(const Vec2& p) const;
  /// Center of a cell.
  Vec2 cell_to_world(const CellIndex& c) const;

  Cell at(int cx, int cy) const { return cells_[index(cx, cy)]; }
  Cell at(const CellIndex& c) const { return at(c.x, c.y); }
  void set(int cx, int cy, Cell state) { cells_[index(cx, cy)] = state; }

  bool is_free(const Vec2& p) const;
  bool is_occupied(const Vec2& p) const;

  /// Mark every cell whose center lies in [lo, hi] (world coords). Map
  /// authoring helper for walls and obstacles.
  void fill_rect(Vec2 lo, Vec2 hi, Cell state);

  /// Dilate Occupied cells by `radius`: every cell whose center is within
  /// `radius` of an originally Occupied cell center becomes Occupied.
  void inflate(double radius);
  OccupancyGrid inflated(double radius) const;

  /// Fuse one scan: cells along each beam become Free, the hit cell Occupied.
  /// Beams reported at max_range mark Free only. Throws OutOfBoundsError when
  /// the sensor pose is outside the grid; beam cells beyond the border are
  /// clipped.
  void integrate_scan(const RangeScan& scan);

  /// True iff every cell touched by segment ab is Free (Unknown counts as
  /// blocked). Throws OutOfBoundsError when an endpoint is outside the grid.
  bool segment_free(Vec2 a, Vec2 b) const;

  int free_cell_count() const;
  int occupied_cell_count() const;

  std::string to_text() const;
  static OccupancyGrid from_text(const std::string& text);
  void save(const std::string& path) const;
  static OccupancyGrid load(const std::string& path);

  bool operator==(const OccupancyGrid&) const = default;

 private:
  size_t index(int cx, int cy) const { return static_cast<size_t>(cy) * width_ + cx; }

  double resolution_ = 1.0;
  Vec2 origin_;
  int width_ = 0;
  int height_ = 0;
  double inflation_radius_ = 0.0;
  std::vector<Cell> cells_;
};

/// Snapshot of the Free cells of a grid for O(1) uniform sampling; the
/// planner builds one per plan() call.
class FreeSampler {
 public:
  explicit FreeSampler(const OccupancyGrid& grid);
  size_t free_count() const { return free_cells_.size(); }
  /// Uniform over free cells, then uniform within the cell. Throws
  /// EmptyFreeSpaceError when the grid has no Free cell.
  Vec2 sample(Rng& rng) const;

 private:
  double resolution_;
  Vec2 origin_;
  std::vector<CellIndex> free_cells_;
};

/// One-shot uniform sample over free space.
Vec2 sample_free(const OccupancyGrid& grid, Rng& rng);

}  // namespace sbamp
