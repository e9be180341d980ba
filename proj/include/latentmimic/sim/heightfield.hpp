#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace lm::sim {

enum class TerrainKind { kFlat, kStairs, kWaves, kNoise };

inline std::string terrain_kind_name(TerrainKind k) {
  switch (k) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kStairs: return "stairs";
    case TerrainKind::kWaves: return "waves";
    case TerrainKind::kNoise: return "noise";
  }
  return "?";
}

inline TerrainKind terrain_kind_from_name(const std::string& name) {
  if (name == "flat") return TerrainKind::kFlat;
  if (name == "stairs") return TerrainKind::kStairs;
  if (name == "waves") return TerrainKind::kWaves;
  if (name == "noise") return TerrainKind::kNoise;
  throw std::invalid_argument("unknown terrain kind '" + name + "'");
}

inline constexpr double kTileSize = 8.0;      // m, square tile
inline constexpr double kStairRun = 0.3;      // m
inline constexpr int kWaveCount = 5;          // full periods across the tile
inline constexpr int kNoiseGridSize = 80;     // nodes per side

// Difficulty parameter, linear in (level-1)/63:
//   stairs: rise in [0.05, 0.23] m; waves: amplitude in [0, 0.2] m;
//   noise: uniform bound in [0, 0.1] m; flat: 0.
inline double terrain_difficulty_param(TerrainKind kind, int level) {
  if (level < 1 || level > 64) {
    throw std::invalid_argument("terrain level must be in [1, 64]");
  }
  const double t = (level - 1) / 63.0;
  switch (kind) {
    case TerrainKind::kFlat: return 0.0;
    case TerrainKind::kStairs: return 0.05 + t * (0.23 - 0.05);
    case TerrainKind::kWaves: return t * 0.2;
    case TerrainKind::kNoise: return t * 0.1;
  }
  return 0.0;
}

struct HeightField {
  TerrainKind kind = TerrainKind::kFlat;
  int level = 1;
  double resolution = 0.1;  // m per cell
  Eigen::MatrixXd grid;     // grid(i, j) = height at (x = i*res, y = j*res)

  double size_x() const { return (grid.rows() - 1) * resolution; }
  double size_y() const { return (grid.cols() - 1) * resolution; }
};

inline HeightField build_terrain(TerrainKind kind, int level,
                                 std::uint64_t seed) {
  const double param = terrain_difficulty_param(kind, level);
  HeightField hf;
  hf.kind = kind;
  hf.level = level;

  if (kind == TerrainKind::kNoise) {
    hf.resolution = 0.1;
    hf.grid.resize(kNoiseGridSize, kNoiseGridSize);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-param, param);
    for (Eigen::Index i = 0; i < hf.grid.rows(); ++i)
      for (Eigen::Index j = 0; j < hf.grid.cols(); ++j)
        hf.grid(i, j) = param == 0.0 ? 0.0 : u(rng);
    return hf;
  }

  hf.resolution = 0.1;
  const int n = static_cast<int>(kTileSize / hf.resolution) + 1;  // 81
  hf.grid.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const double x = i * hf.resolution;
    double h = 0.0;
    switch (kind) {
      case TerrainKind::kFlat:
        h = 0.0;
        break;
      case TerrainKind::kStairs:
        h = std::floor(x / kStairRun) * param;
        break;
      case TerrainKind::kWaves:
        h = param * std::sin(2.0 * M_PI * kWaveCount * x / kTileSize);
        break;
      case TerrainKind::kNoise:
        break;
    }
    for (int j = 0; j < n; ++j) hf.grid(i, j) = h;
  }
  return hf;
}

// Bilinear interpolation, clamped at the tile border. Exact at grid nodes.
inline double sample_height(const HeightField& hf, double x, double y) {
  const double fx = std::clamp(x / hf.resolution, 0.0,
                               static_cast<double>(hf.grid.rows() - 1));
  const double fy = std::clamp(y / hf.resolution, 0.0,
                               static_cast<double>(hf.grid.cols() - 1));
  const int i0 = std::min(static_cast<int>(fx),
                          static_cast<int>(hf.grid.rows()) - 2);
  const int j0 = std::min(static_cast<int>(fy),
                          static_cast<int>(hf.grid.cols()) - 2);
  const double tx = fx - i0;
  const double ty = fy - j0;
  return (1 - tx) * (1 - ty) * hf.grid(i0, j0) +
         tx * (1 - ty) * hf.grid(i0 + 1, j0) +
         (1 - tx) * ty * hf.grid(i0, j0 + 1) +
         tx * ty * hf.grid(i0 + 1, j0 + 1);
}

// CSV grid export, one row per grid x index.
inline void export_terrain_csv(const HeightField& hf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_terrain_csv: cannot open " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < hf.grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < hf.grid.cols(); ++j) {
      if (j > 0) out << ",";
      out << hf.grid(i, j);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("export_terrain_csv: write failed");
}

}  // namespace lm::sim
