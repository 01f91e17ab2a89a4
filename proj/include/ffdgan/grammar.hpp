#pragma once

// Probabilistic wing grammar: each section's attributes are drawn uniformly
// within bounds conditioned on the previous section, then the sections are
// lofted into a SurfaceGrid.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ffdgan/geometry.hpp"
#include "ffdgan/rng.hpp"

namespace ffdgan::grammar {

// Unit-chord section ordered TE -> upper -> LE -> lower -> TE, leading edge
// at the origin and trailing edge at (1, 0).
struct AirfoilSection {
  std::vector<geom::Point2> points;
  void validate() const;
};

// NACA 4-digit section with a closed trailing edge on cosine-spaced stations.
// `n_points` must be odd and at least 65.
AirfoilSection naca4_airfoil(double camber, double camber_pos, double thickness,
                             std::size_t n_points);

// Resamples raw coordinates (TE -> upper -> LE -> lower -> TE, any spacing)
// onto `n_points` cosine-spaced points and normalizes the chord.
AirfoilSection resample_airfoil(std::span<const geom::Point2> raw, std::size_t n_points);

// Reads a Selig-format coordinate file (name line followed by "x z" rows).
AirfoilSection load_airfoil_file(const std::filesystem::path& path, std::size_t n_points);

AirfoilSection blend(const AirfoilSection& a, const AirfoilSection& b, double t);

struct WingSection {
  double span_fraction = 0.0;
  double chord = 0.0;
  double twist_deg = 0.0;  // positive nose up
  double le_x = 0.0;
  double le_z = 0.0;
  AirfoilSection airfoil;
};

struct WingSpec {
  std::vector<WingSection> sections;
  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Numeric bounds of the grammar rules. Lengths are in half-span units.
struct GrammarConfig {
  int min_sections = 4;
  int max_sections = 8;
  Range root_chord{0.15, 0.45};
  double min_tip_ratio = 0.2;      // chord >= ratio * root chord
  double max_chord_step = 0.3;     // chord(i) >= (1 - step) * chord(i - 1)
  double twist_step_deg = 5.0;     // |twist(i) - twist(i - 1)| bound
  Range total_twist_deg{-10.0, 10.0};
  Range sweep_slope{0.0, 0.6};     // leading-edge x increment per unit span
  Range dihedral_step{0.0, 0.03};  // leading-edge z increment per section
  double min_span_gap = 0.08;
  bool uniform_span_stations = false;
  Range camber{0.0, 0.06};
  Range camber_pos{0.3, 0.6};
  Range thickness{0.08, 0.16};
  std::size_t sections_out = 21;   // M
  std::size_t points_out = 199;    // N

  void validate() const;
};

WingSpec sample_wing(const GrammarConfig& config, Rng& rng);

// Lofts M uniformly spaced span stations; section attributes and airfoil
// shapes are linearly interpolated between neighbouring spec sections.
geom::SurfaceGrid realize_surface(const WingSpec& spec, std::size_t sections,
                                  std::size_t points_per_section);

struct Dataset {
  std::vector<geom::SurfaceGrid> grids;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  std::vector<geom::SurfaceGrid> subset(std::span<const std::size_t> indices) const;
};

// Wing i is drawn from a stream derived from (seed, i), so the dataset does
// not depend on generation order. Wings failing aero::feasibility
// (self-intersection, or no positive lift at 2 degrees) are redrawn. The
// 80/20 split comes from a seeded shuffle.
Dataset generate_dataset(const GrammarConfig& config, std::size_t count, std::uint64_t seed);

}  // namespace ffdgan::grammar
