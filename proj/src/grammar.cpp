#include "ffdgan/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ffdgan/aero.hpp"
#include "ffdgan/errors.hpp"

namespace ffdgan::grammar {

using geom::Point2;
using geom::SurfaceGrid;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Moves the leading edge to the origin and the trailing edge to (1, 0).
void normalize_chord(std::vector<Point2>& pts) {
  const std::size_t le = geom::leading_edge_index(std::span<const Point2>(pts));
  const Point2 origin = pts[le];
  const double cx = pts[0].x - origin.x, cz = pts[0].z - origin.z;
  const double chord = std::hypot(cx, cz);
  if (!(chord > 0.0)) throw GeometryError("airfoil: zero chord");
  const double c = cx / chord, s = cz / chord;
  for (auto& p : pts) {
    const double dx = p.x - origin.x, dz = p.z - origin.z;
    p = {(c * dx + s * dz) / chord, (-s * dx + c * dz) / chord};
  }
  pts.front() = {1.0, 0.0};
  pts.back() = {1.0, 0.0};
}

std::vector<double> cosine_stations(std::size_t count) {
  std::vector<double> x(count);
  for (std::size_t k = 0; k < count; ++k) {
    x[k] = 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(k) / static_cast<double>(count - 1)));
  }
  x.front() = 1.0;
  x.back() = 0.0;
  return x;
}

void require_odd_resolution(std::size_t n_points) {
  if (n_points < 65 || n_points % 2 == 0) {
    throw ArgumentError("airfoil resolution must be odd and >= 65, got " + std::to_string(n_points));
  }
}

// Linear interpolation of z(x) along a polyline sorted by increasing x.
double interp_sorted(const std::vector<Point2>& line, double x) {
  if (x <= line.front().x) return line.front().z;
  if (x >= line.back().x) return line.back().z;
  const auto it = std::upper_bound(line.begin(), line.end(), x,
                                   [](double v, const Point2& p) { return v < p.x; });
  const Point2& b = *it;
  const Point2& a = *(it - 1);
  const double t = b.x > a.x ? (x - a.x) / (b.x - a.x) : 0.0;
  return a.z + t * (b.z - a.z);
}

// Exact at both ends.
double lerp(double a, double b, double t) { return (1.0 - t) * a + t * b; }

}  // namespace

void AirfoilSection::validate() const {
  if (points.size() < 5) throw ArgumentError("AirfoilSection: too few points");
  if (!(points.front() == points.back())) {
    throw GeometryError("AirfoilSection: trailing edge is not closed");
  }
  std::vector<Point2> poly(points.begin(), points.end() - 1);
  if (!(geom::signed_area(poly) > 0.0) || geom::polygon_self_intersects(poly)) {
    throw GeometryError("AirfoilSection: section polygon is not simple");
  }
}

AirfoilSection naca4_airfoil(double camber, double camber_pos, double thickness,
                             std::size_t n_points) {
  if (!(camber >= 0.0 && camber <= 0.09)) throw ArgumentError("naca4: camber outside [0, 0.09]");
  if (camber > 0.0 && !(camber_pos >= 0.2 && camber_pos <= 0.7)) {
    throw ArgumentError("naca4: camber position outside [0.2, 0.7]");
  }
  if (!(thickness >= 0.06 && thickness <= 0.18)) {
    throw ArgumentError("naca4: thickness outside [0.06, 0.18]");
  }
  require_odd_resolution(n_points);

  const auto xs = cosine_stations((n_points + 1) / 2);
  auto half_thickness = [&](double x) {
    return 5.0 * thickness *
           (0.2969 * std::sqrt(x) - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x -
            0.1036 * x * x * x * x);
  };
  auto camber_line = [&](double x, double& yc, double& slope) {
    if (camber == 0.0) {
      yc = slope = 0.0;
    } else if (x < camber_pos) {
      yc = camber / (camber_pos * camber_pos) * (2.0 * camber_pos * x - x * x);
      slope = 2.0 * camber / (camber_pos * camber_pos) * (camber_pos - x);
    } else {
      const double q = (1.0 - camber_pos) * (1.0 - camber_pos);
      yc = camber / q * (1.0 - 2.0 * camber_pos + 2.0 * camber_pos * x - x * x);
      slope = 2.0 * camber / q * (camber_pos - x);
    }
  };

  std::vector<Point2> upper, lower;
  for (double x : xs) {
    double yc, slope;
    camber_line(x, yc, slope);
    const double yt = half_thickness(x);
    const double th = std::atan(slope);
    upper.push_back({x - yt * std::sin(th), yc + yt * std::cos(th)});
    lower.push_back({x + yt * std::sin(th), yc - yt * std::cos(th)});
  }
  AirfoilSection out;
  out.points = upper;
  for (std::size_t k = lower.size() - 1; k-- > 0;) out.points.push_back(lower[k]);
  normalize_chord(out.points);
  return out;
}

AirfoilSection resample_airfoil(std::span<const Point2> raw, std::size_t n_points) {
  require_odd_resolution(n_points);
  if (raw.size() < 5) throw ArgumentError("resample_airfoil: too few input points");
  std::size_t le = 0;
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (raw[i].x < raw[le].x) le = i;
  }
  if (le == 0 || le + 1 == raw.size()) {
    throw GeometryError("resample_airfoil: points are not ordered TE -> LE -> TE");
  }
  std::vector<Point2> upper(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(le) + 1);
  std::reverse(upper.begin(), upper.end());
  std::vector<Point2> lower(raw.begin() + static_cast<std::ptrdiff_t>(le), raw.end());
  auto by_x = [](const Point2& a, const Point2& b) { return a.x < b.x; };
  std::stable_sort(upper.begin(), upper.end(), by_x);
  std::stable_sort(lower.begin(), lower.end(), by_x);

  const double x0 = raw[le].x;
  const double x1 = std::max(raw.front().x, raw.back().x);
  const auto stations = cosine_stations((n_points + 1) / 2);
  AirfoilSection out;
  for (double s : stations) {
    const double x = x0 + s * (x1 - x0);
    out.points.push_back({x, interp_sorted(upper, x)});
  }
  for (std::size_t k = stations.size() - 1; k-- > 0;) {
    const double x = x0 + stations[k] * (x1 - x0);
    out.points.push_back({x, interp_sorted(lower, x)});
  }
  const double te_z = 0.5 * (out.points.front().z + out.points.back().z);
  out.points.front().z = te_z;
  out.points.back() = out.points.front();
  out.points[stations.size() - 1] = raw[le];
  normalize_chord(out.points);
  return out;
}

AirfoilSection load_airfoil_file(const std::filesystem::path& path, std::size_t n_points) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open airfoil file " + path.string());
  std::vector<Point2> raw;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    row.imbue(std::locale::classic());
    double x, z;
    if (row >> x >> z) raw.push_back({x, z});
  }
  if (raw.size() < 5) throw IoError("airfoil file " + path.string() + " has too few coordinates");
  return resample_airfoil(raw, n_points);
}

AirfoilSection blend(const AirfoilSection& a, const AirfoilSection& b, double t) {
  if (a.points.size() != b.points.size()) throw ArgumentError("blend: resolutions differ");
  AirfoilSection out;
  out.points.resize(a.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    out.points[i] = {lerp(a.points[i].x, b.points[i].x, t), lerp(a.points[i].z, b.points[i].z, t)};
  }
  return out;
}

void WingSpec::validate() const {
  if (sections.size() < 4 || sections.size() > 8) {
    throw ArgumentError("WingSpec: section count must be in [4, 8]");
  }
  if (sections.front().span_fraction != 0.0 || sections.back().span_fraction != 1.0) {
    throw ArgumentError("WingSpec: span fractions must run from 0 to 1");
  }
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& s = sections[i];
    if (!(s.chord > 0.0)) throw ArgumentError("WingSpec: chord must be positive");
    if (i > 0) {
      if (!(s.span_fraction > sections[i - 1].span_fraction)) {
        throw ArgumentError("WingSpec: span fractions must increase strictly");
      }
      if (s.chord > sections[i - 1].chord) {
        throw ArgumentError("WingSpec: chord must not increase toward the tip");
      }
      if (s.airfoil.points.size() != sections[0].airfoil.points.size()) {
        throw ArgumentError("WingSpec: airfoil resolutions differ between sections");
      }
    }
  }
}

void GrammarConfig::validate() const {
  auto ordered = [](const Range& r, const char* name) {
    if (!(r.lo <= r.hi)) throw ArgumentError(std::string("GrammarConfig: ") + name + " has LB > UB");
  };
  if (min_sections < 4 || max_sections > 8 || min_sections > max_sections) {
    throw ArgumentError("GrammarConfig: section count bounds must lie in [4, 8]");
  }
  ordered(root_chord, "root_chord");
  ordered(total_twist_deg, "total_twist_deg");
  ordered(sweep_slope, "sweep_slope");
  ordered(dihedral_step, "dihedral_step");
  ordered(camber, "camber");
  ordered(camber_pos, "camber_pos");
  ordered(thickness, "thickness");
  if (!(root_chord.lo > 0.0)) throw ArgumentError("GrammarConfig: root chord must be positive");
  if (!(min_tip_ratio > 0.0 && min_tip_ratio <= 1.0)) {
    throw ArgumentError("GrammarConfig: min_tip_ratio must lie in (0, 1]");
  }
  if (!(max_chord_step >= 0.0 && max_chord_step < 1.0)) {
    throw ArgumentError("GrammarConfig: max_chord_step must lie in [0, 1)");
  }
  if (!(twist_step_deg >= 0.0)) throw ArgumentError("GrammarConfig: twist step must be >= 0");
  if (total_twist_deg.lo > 0.0 || total_twist_deg.hi < 0.0) {
    throw ArgumentError("GrammarConfig: total twist range must contain 0");
  }
  if (!(min_span_gap >= 0.0) || min_span_gap * (max_sections - 1) >= 1.0) {
    throw ArgumentError("GrammarConfig: min_span_gap too large for the section count");
  }
  if (sections_out < static_cast<std::size_t>(max_sections)) {
    throw ArgumentError("GrammarConfig: sections_out must be >= max_sections");
  }
  require_odd_resolution(points_out);
}

WingSpec sample_wing(const GrammarConfig& config, Rng& rng) {
  config.validate();
  const auto count = static_cast<std::size_t>(rng.uniform_int(config.min_sections, config.max_sections));

  std::vector<double> fractions(count);
  if (config.uniform_span_stations) {
    for (std::size_t i = 0; i < count; ++i) {
      fractions[i] = static_cast<double>(i) / static_cast<double>(count - 1);
    }
  } else {
    // Uniform over placements whose gaps all exceed min_span_gap.
    const double slack = 1.0 - config.min_span_gap * static_cast<double>(count - 1);
    std::vector<double> interior(count - 2);
    for (auto& f : interior) f = rng.uniform(0.0, slack);
    std::sort(interior.begin(), interior.end());
    fractions.front() = 0.0;
    fractions.back() = 1.0;
    for (std::size_t i = 1; i + 1 < count; ++i) {
      fractions[i] = interior[i - 1] + config.min_span_gap * static_cast<double>(i);
    }
  }

  WingSpec spec;
  spec.sections.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& s = spec.sections[i];
    s.span_fraction = fractions[i];
    if (i == 0) {
      s.chord = rng.uniform(config.root_chord.lo, config.root_chord.hi);
      s.twist_deg = 0.0;
      s.le_x = 0.0;
      s.le_z = 0.0;
    } else {
      const auto& prev = spec.sections[i - 1];
      const double root = spec.sections[0].chord;
      const double chord_lb =
          std::min(prev.chord, std::max(config.min_tip_ratio * root, (1.0 - config.max_chord_step) * prev.chord));
      s.chord = rng.uniform(chord_lb, prev.chord);
      const double twist_lb = std::max(-config.twist_step_deg, config.total_twist_deg.lo - prev.twist_deg);
      const double twist_ub = std::min(config.twist_step_deg, config.total_twist_deg.hi - prev.twist_deg);
      s.twist_deg = prev.twist_deg + rng.uniform(twist_lb, twist_ub);
      const double dspan = s.span_fraction - prev.span_fraction;
      s.le_x = prev.le_x + rng.uniform(config.sweep_slope.lo, config.sweep_slope.hi) * dspan;
      s.le_z = prev.le_z + rng.uniform(config.dihedral_step.lo, config.dihedral_step.hi);
    }
    const double m = rng.uniform(config.camber.lo, config.camber.hi);
    const double p = rng.uniform(config.camber_pos.lo, config.camber_pos.hi);
    const double t = rng.uniform(config.thickness.lo, config.thickness.hi);
    s.airfoil = naca4_airfoil(m, p, t, config.points_out);
  }
  return spec;
}

SurfaceGrid realize_surface(const WingSpec& spec, std::size_t sections,
                            std::size_t points_per_section) {
  spec.validate();
  if (sections < spec.sections.size()) {
    throw ArgumentError("realize_surface: fewer span stations than spec sections");
  }
  if (points_per_section != spec.sections[0].airfoil.points.size()) {
    throw ArgumentError("realize_surface: airfoil resolution does not match N");
  }
  SurfaceGrid grid(sections, points_per_section);
  std::size_t seg = 0;
  for (std::size_t s = 0; s < sections; ++s) {
    const double eta = s + 1 == sections ? 1.0 : static_cast<double>(s) / static_cast<double>(sections - 1);
    while (seg + 2 < spec.sections.size() && eta > spec.sections[seg + 1].span_fraction) ++seg;
    const auto& a = spec.sections[seg];
    const auto& b = spec.sections[seg + 1];
    const double t = (eta - a.span_fraction) / (b.span_fraction - a.span_fraction);
    const double chord = lerp(a.chord, b.chord, t);
    const double twist = lerp(a.twist_deg, b.twist_deg, t) * kDeg;
    const double le_x = lerp(a.le_x, b.le_x, t);
    const double le_z = lerp(a.le_z, b.le_z, t);
    const AirfoilSection foil = t == 0.0 ? a.airfoil : t == 1.0 ? b.airfoil : blend(a.airfoil, b.airfoil, t);
    const double c = std::cos(twist), sn = std::sin(twist);
    for (std::size_t k = 0; k < points_per_section; ++k) {
      const auto& q = foil.points[k];
      grid.at(s, k) = {le_x + chord * (q.x * c + q.z * sn), eta, le_z + chord * (-q.x * sn + q.z * c)};
    }
  }
  return grid;
}

std::vector<SurfaceGrid> Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<SurfaceGrid> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(grids.at(i));
  return out;
}

Dataset generate_dataset(const GrammarConfig& config, std::size_t count, std::uint64_t seed) {
  config.validate();
  if (count < 10) throw ArgumentError("generate_dataset: count must be >= 10");
  constexpr int kMaxAttempts = 1000;
  Dataset data;
  data.seed = seed;
  data.grids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      Rng rng = Rng::derive(seed, i, static_cast<std::uint64_t>(attempt));
      auto grid = realize_surface(sample_wing(config, rng), config.sections_out, config.points_out);
      if (aero::feasibility(grid)) {
        data.grids.push_back(std::move(grid));
        accepted = true;
      }
    }
    if (!accepted) throw GeometryError("generate_dataset: could not draw a feasible wing");
  }

  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng shuffle = Rng::derive(seed, count, 0x5b1177ULL);
  for (std::size_t i = count - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train = count * 8 / 10;
  data.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  data.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return data;
}

}  // namespace ffdgan::grammar
