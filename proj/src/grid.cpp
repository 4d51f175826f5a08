#include "sbamp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sbamp/strings.hpp"

namespace sbamp {

std::vector<CellIndex> supercover_cells(Vec2 a, Vec2 b, double resolution, Vec2 origin) {
  // Amanatides-Woo traversal in cell space, stepping both axes when the ray
  // crosses a cell corner so the result is a true supercover.
  const double ax = (a.x - origin.x) / resolution;
  const double ay = (a.y - origin.y) / resolution;
  const double bx = (b.x - origin.x) / resolution;
  const double by = (b.y - origin.y) / resolution;

  int x = static_cast<int>(std::floor(ax));
  int y = static_cast<int>(std::floor(ay));
  const int xe = static_cast<int>(std::floor(bx));
  const int ye = static_cast<int>(std::floor(by));

  std::vector<CellIndex> cells;
  cells.reserve(static_cast<size_t>(std::abs(xe - x) + std::abs(ye - y)) + 4);
  cells.push_back({x, y});

  const double dx = bx - ax;
  const double dy = by - ay;
  const int sx = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
  const int sy = dy > 0.0 ? 1 : (dy < 0.0 ? -1 : 0);

  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = inf, t_delta_x = inf;
  double t_max_y = inf, t_delta_y = inf;
  if (sx != 0) {
    const double next = sx > 0 ? (x + 1 - ax) : (x - ax);
    t_max_x = next / dx;
    t_delta_x = sx / dx;
  }
  if (sy != 0) {
    const double next = sy > 0 ? (y + 1 - ay) : (y - ay);
    t_max_y = next / dy;
    t_delta_y = sy / dy;
  }

  int steps = std::abs(xe - x) + std::abs(ye - y);
  while (steps > 0) {
    if (t_max_x < t_max_y) {
      x += sx;
      t_max_x += t_delta_x;
      --steps;
    } else if (t_max_y < t_max_x) {
      y += sy;
      t_max_y += t_delta_y;
      --steps;
    } else if (steps >= 2) {
      // Corner crossing: the segment touches both side cells.
      cells.push_back({x + sx, y});
      cells.push_back({x, y + sy});
      x += sx;
      y += sy;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
      steps -= 2;
    } else {
      // Tie on the final step: advance the axis that has not reached its
      // endpoint yet.
      if (x != xe) {
        x += sx;
        t_max_x += t_delta_x;
      } else {
        y += sy;
        t_max_y += t_delta_y;
      }
      --steps;
    }
    cells.push_back({x, y});
  }
  return cells;
}

OccupancyGrid::OccupancyGrid(double resolution, Vec2 origin, int width, int height,
                             Cell fill, double inflation_radius)
    : resolution_(resolution),
      origin_(origin),
      width_(width),
      height_(height),
      inflation_radius_(inflation_radius),
      cells_(static_cast<size_t>(width) * height, fill) {
  if (resolution <= 0.0 || width <= 0 || height <= 0)
    throw ConfigError("grid needs positive resolution and dimensions");
}

bool OccupancyGrid::in_bounds(const Vec2& p) const {
  const CellIndex c = world_to_cell(p);
  return in_bounds(c.x, c.y);
}

CellIndex OccupancyGrid::world_to_cell(const Vec2& p) const {
  return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
          static_cast<int>(std::floor((p.y - origin_.y) / resolution_))};
}

Vec2 OccupancyGrid::cell_to_world(const CellIndex& c) const {
  return {origin_.x + (c.x + 0.5) * resolution_, origin_.y + (c.y + 0.5) * resolution_};
}

bool OccupancyGrid::is_free(const Vec2& p) const {
  const CellIndex c = world_to_cell(p);
  return in_bounds(c.x, c.y) && at(c) == Cell::Free;
}

bool OccupancyGrid::is_occupied(const Vec2& p) const {
  const CellIndex c = world_to_cell(p);
  return in_bounds(c.x, c.y) && at(c) == Cell::Occupied;
}

void OccupancyGrid::fill_rect(Vec2 lo, Vec2 hi, Cell state) {
  for (int cy = 0; cy < height_; ++cy) {
    for (int cx = 0; cx < width_; ++cx) {
      const Vec2 c = cell_to_world({cx, cy});
      if (c.x >= lo.x && c.x <= hi.x && c.y >= lo.y && c.y <= hi.y) set(cx, cy, state);
    }
  }
}

void OccupancyGrid::inflate(double radius) {
  if (radius <= 0.0) return;
  const int r_cells = static_cast<int>(std::floor(radius / resolution_ + 1e-9));
  const double r2 = (radius / resolution_) * (radius / resolution_) + 1e-9;

  std::vector<CellIndex> seeds;
  for (int cy = 0; cy < height_; ++cy)
    for (int cx = 0; cx < width_; ++cx)
      if (at(cx, cy) == Cell::Occupied) seeds.push_back({cx, cy});

  for (const CellIndex& s : seeds) {
    for (int dy = -r_cells; dy <= r_cells; ++dy) {
      for (int dx = -r_cells; dx <= r_cells; ++dx) {
        if (dx * dx + dy * dy > r2) continue;
        const int cx = s.x + dx, cy = s.y + dy;
        if (in_bounds(cx, cy)) set(cx, cy, Cell::Occupied);
      }
    }
  }
}

OccupancyGrid OccupancyGrid::inflated(double radius) const {
  OccupancyGrid out = *this;
  out.inflate(radius);
  out.inflation_radius_ = radius;
  return out;
}

void OccupancyGrid::integrate_scan(const RangeScan& scan) {
  if (!in_bounds(scan.position))
    throw OutOfBoundsError("scan pose outside grid bounds");
  if (scan.angles.size() != scan.ranges.size())
    throw InvalidDataError("scan angles/ranges length mismatch");

  for (size_t i = 0; i < scan.angles.size(); ++i) {
    const double range = std::min(scan.ranges[i], scan.max_range);
    const bool hit = scan.ranges[i] < scan.max_range;
    const double dir = scan.heading + scan.angles[i];
    const Vec2 end = scan.position + Vec2{std::cos(dir), std::sin(dir)} * range;

    const auto cells = supercover_cells(scan.position, end, resolution_, origin_);
    const CellIndex hit_cell = world_to_cell(end);
    for (const CellIndex& c : cells) {
      if (!in_bounds(c.x, c.y)) continue;
      if (hit && c == hit_cell) continue;
      set(c.x, c.y, Cell::Free);
    }
    if (hit && in_bounds(hit_cell.x, hit_cell.y)) set(hit_cell.x, hit_cell.y, Cell::Occupied);
  }
}

bool OccupancyGrid::segment_free(Vec2 a, Vec2 b) const {
  if (!in_bounds(a) || !in_bounds(b))
    throw OutOfBoundsError("segment endpoint outside grid bounds");
  for (const CellIndex& c : supercover_cells(a, b, resolution_, origin_)) {
    if (!in_bounds(c.x, c.y)) return false;
    if (at(c) != Cell::Free) return false;
  }
  return true;
}

int OccupancyGrid::free_cell_count() const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), Cell::Free));
}

int OccupancyGrid::occupied_cell_count() const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), Cell::Occupied));
}

namespace {

char cell_to_char(Cell c) {
  switch (c) {
    case Cell::Free: return '.';
    case Cell::Occupied: return '#';
    default: return '?';
  }
}

Cell char_to_cell(char c, int line) {
  switch (c) {
    case '.': return Cell::Free;
    case '#': return Cell::Occupied;
    case '?': return Cell::Unknown;
    default: throw ParseError(std::string("unexpected map character '") + c + "'", line);
  }
}

}  // namespace

std::string OccupancyGrid::to_text() const {
  std::string out;
  out += "resolution=" + format_double(resolution_) + "\n";
  out += "origin_x=" + format_double(origin_.x) + "\n";
  out += "origin_y=" + format_double(origin_.y) + "\n";
  out += "width=" + std::to_string(width_) + "\n";
  out += "height=" + std::to_string(height_) + "\n";
  out += "inflation_radius=" + format_double(inflation_radius_) + "\n";
  // Rows are written top-down so the file reads like the map.
  for (int cy = height_ - 1; cy >= 0; --cy) {
    for (int cx = 0; cx < width_; ++cx) out += cell_to_char(at(cx, cy));
    out += '\n';
  }
  return out;
}

OccupancyGrid OccupancyGrid::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  double resolution = 0.0, origin_x = 0.0, origin_y = 0.0, inflation = 0.0;
  long width = 0, height = 0;
  bool have[6] = {};
  static const char* keys[6] = {"resolution", "origin_x", "origin_y",
                                "width",      "height",   "inflation_radius"};

  for (int k = 0; k < 6; ++k) {
    if (!std::getline(in, line)) throw ParseError("missing map header line", line_no + 1);
    ++line_no;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    int ki = -1;
    for (int i = 0; i < 6; ++i)
      if (key == keys[i]) ki = i;
    if (ki < 0) throw ParseError("unknown map header key", line_no, key);
    if (have[ki]) throw ParseError("duplicate map header key", line_no, key);
    have[ki] = true;
    switch (ki) {
      case 0: resolution = parse_double(value, line_no, key); break;
      case 1: origin_x = parse_double(value, line_no, key); break;
      case 2: origin_y = parse_double(value, line_no, key); break;
      case 3: width = parse_long(value, line_no, key); break;
      case 4: height = parse_long(value, line_no, key); break;
      case 5: inflation = parse_double(value, line_no, key); break;
    }
  }
  if (resolution <= 0.0) throw ParseError("resolution must be > 0", -1, "resolution");
  if (width <= 0 || height <= 0) throw ParseError("width/height must be > 0");

  OccupancyGrid grid(resolution, {origin_x, origin_y}, static_cast<int>(width),
                     static_cast<int>(height), Cell::Unknown, inflation);
  for (int cy = static_cast<int>(height) - 1; cy >= 0; --cy) {
    if (!std::getline(in, line)) throw ParseError("missing map row", line_no + 1);
    ++line_no;
    if (static_cast<long>(line.size()) != width)
      throw ParseError("map row has wrong length", line_no);
    for (int cx = 0; cx < width; ++cx) grid.set(cx, cy, char_to_cell(line[cx], line_no));
  }
  return grid;
}

void OccupancyGrid::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write map file: " + path);
  out << to_text();
}

OccupancyGrid OccupancyGrid::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read map file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

FreeSampler::FreeSampler(const OccupancyGrid& grid)
    : resolution_(grid.resolution()), origin_(grid.origin()) {
  for (int cy = 0; cy < grid.height(); ++cy)
    for (int cx = 0; cx < grid.width(); ++cx)
      if (grid.at(cx, cy) == Cell::Free) free_cells_.push_back({cx, cy});
}

Vec2 FreeSampler::sample(Rng& rng) const {
  if (free_cells_.empty()) throw EmptyFreeSpaceError("grid has no free cells");
  const CellIndex c = free_cells_[rng.uniform_int(free_cells_.size())];
  const double u = rng.uniform01();
  const double v = rng.uniform01();
  return {origin_.x + (c.x + u) * resolution_, origin_.y + (c.y + v) * resolution_};
}

Vec2 sample_free(const OccupancyGrid& grid, Rng& rng) {
  return FreeSampler(grid).sample(rng);
}

}  // namespace sbamp
