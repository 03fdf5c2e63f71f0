#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "harnackflow/errors.hpp"
#include "harnackflow/field.hpp"
#include "harnackflow/flow.hpp"
#include "harnackflow/geometry.hpp"

namespace harnackflow {

// Trajectory file layout, all integers and floats little-endian:
//
//   bytes  0..7   magic "HFTRAJ" followed by 0x00 and format version 0x01
//   u32           surface kind (0 = torus, 1 = sphere)
//   u32           N
//   f64           torus side L (pi for the sphere)
//   f64           dt
//   f64           dt_out
//   f64           c of the heat model (-1 with potential, 0 plain heat)
//   u32           length of the initial-data id, then that many bytes
//   u64           snapshot count K
//   K times:      f64 t, then phi[size], then f[size]
//
// size is N*N on the torus (row-major, x index outermost) and N on the sphere.

inline constexpr std::array<char, 8> kTrajectoryMagic = {'H', 'F', 'T', 'R', 'A', 'J', '\0', '\x01'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(os, bits);
}

inline void read_exact(std::istream& is, char* buf, std::size_t n) {
  is.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw Error(ErrorKind::Io, "trajectory file is truncated");
  }
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  read_exact(is, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  read_exact(is, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace detail

inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
  if (traj.size() == 0) throw Error(ErrorKind::InvalidArgument, "cannot persist an empty trajectory");
  const Grid& g = traj.grid();
  os.write(kTrajectoryMagic.data(), kTrajectoryMagic.size());
  detail::put_u32(os, g.kind == SurfaceKind::Torus ? 0u : 1u);
  detail::put_u32(os, static_cast<std::uint32_t>(g.n));
  detail::put_f64(os, g.length);
  detail::put_f64(os, traj.dt);
  detail::put_f64(os, traj.dt_out);
  detail::put_f64(os, traj.model.c);
  detail::put_u32(os, static_cast<std::uint32_t>(traj.initial_id.size()));
  os.write(traj.initial_id.data(), static_cast<std::streamsize>(traj.initial_id.size()));
  detail::put_u64(os, traj.size());
  for (const FlowState& s : traj.states) {
    detail::put_f64(os, s.t);
    for (double v : s.geom.phi().values()) detail::put_f64(os, v);
    for (double v : s.f.values()) detail::put_f64(os, v);
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing trajectory");
}

inline Trajectory read_trajectory(std::istream& is) {
  std::array<char, 8> magic{};
  detail::read_exact(is, magic.data(), magic.size());
  if (magic != kTrajectoryMagic) throw Error(ErrorKind::Io, "not a trajectory file (bad magic)");
  const std::uint32_t kind = detail::get_u32(is);
  if (kind > 1) throw Error(ErrorKind::Io, "unknown surface kind " + std::to_string(kind));
  const auto n = static_cast<int>(detail::get_u32(is));
  const double length = detail::get_f64(is);
  const Grid grid = kind == 0 ? Grid::torus(n, length) : Grid::sphere(n);

  Trajectory traj;
  traj.dt = detail::get_f64(is);
  traj.dt_out = detail::get_f64(is);
  traj.model = HeatModel{detail::get_f64(is)};
  const std::uint32_t id_len = detail::get_u32(is);
  traj.initial_id.resize(id_len);
  if (id_len > 0) detail::read_exact(is, traj.initial_id.data(), id_len);
  const std::uint64_t count = detail::get_u64(is);
  traj.states.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t k = 0; k < count; ++k) {
    const double t = detail::get_f64(is);
    std::vector<double> phi(grid.size()), f(grid.size());
    for (double& v : phi) v = detail::get_f64(is);
    for (double& v : f) v = detail::get_f64(is);
    traj.states.push_back(FlowState{t, SurfaceGeometry(ScalarField(grid, std::move(phi))),
                                    ScalarField(grid, std::move(f))});
  }
  return traj;
}

inline void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  write_trajectory(os, traj);
}

inline Trajectory load_trajectory(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_trajectory(is);
}

}  // namespace harnackflow
