#include "pwdesk/pwbasis.hpp"
#include "pwdesk/error.hpp"
#include "pwdesk/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace pwdesk {

namespace {

std::size_t grid_index(const Eigen::Vector3i& m, std::array<int, 3> d) {
  auto wrap = [](int v, int n) {
    int r = v % n;
    return r < 0 ? r + n : r;
  };
  return (std::size_t(wrap(m[0], d[0])) * d[1] + wrap(m[1], d[1])) * d[2] +
         wrap(m[2], d[2]);
}

} // namespace

double DensityGrid::integral() const {
  double s = std::accumulate(values.begin(), values.end(), 0.0);
  return s * cell_dv();
}

DensityGrid make_density_grid(const Cell& cell, std::array<int, 3> dims) {
  DensityGrid g;
  g.dims = dims;
  g.values.assign(std::size_t(dims[0]) * dims[1] * dims[2], 0.0);
  double a3 = units::angstrom_in_bohr;
  g.volume_bohr = cell.volume() * a3 * a3 * a3;
  return g;
}

PlaneWaveBasis build_basis(const Cell& cell, const Eigen::Vector3d& k_frac,
                           double ecut_wfc_ry) {
  if (ecut_wfc_ry <= 0.0) throw InputError("ecut_wfc must be positive");
  PlaneWaveBasis basis;
  basis.k = k_frac;
  basis.ecut_wfc = ecut_wfc_ry;
  basis.recip_bohr =
      reciprocal_lattice(cell) * units::bohr_in_angstrom; // Ang^-1 -> Bohr^-1

  const double ecut_ha = units::ry_to_hartree(ecut_wfc_ry);
  const double gmax = std::sqrt(2.0 * ecut_ha);
  const Eigen::Vector3d kcart = basis.recip_bohr.transpose() * k_frac;

  // |G| >= 2 pi |m_i| / |a_i|, so |m_i| <= (gmax + |k|) |a_i| / (2 pi).
  int mmax[3];
  for (int i = 0; i < 3; ++i) {
    double alen = cell.lattice.row(i).norm() * units::angstrom_in_bohr;
    mmax[i] = int(std::ceil((gmax + kcart.norm()) * alen / (2.0 * units::pi))) + 1;
  }

  struct Entry {
    double t;
    Eigen::Vector3i m;
  };
  std::vector<Entry> entries;
  for (int i = -mmax[0]; i <= mmax[0]; ++i)
    for (int j = -mmax[1]; j <= mmax[1]; ++j)
      for (int l = -mmax[2]; l <= mmax[2]; ++l) {
        Eigen::Vector3d kg = basis.recip_bohr.transpose() *
                             (k_frac + Eigen::Vector3d(i, j, l));
        double t = 0.5 * kg.squaredNorm();
        if (t <= ecut_ha + 1e-14) entries.push_back({t, {i, j, l}});
      }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.t != b.t) return a.t < b.t;
    return std::lexicographical_compare(a.m.data(), a.m.data() + 3,
                                        b.m.data(), b.m.data() + 3);
  });

  int maxm[3] = {0, 0, 0};
  for (const auto& e : entries) {
    basis.millers.push_back(e.m);
    basis.kinetic.push_back(e.t);
    for (int i = 0; i < 3; ++i)
      maxm[i] = std::max(maxm[i], std::abs(e.m[i]));
  }
  for (int i = 0; i < 3; ++i)
    basis.fft_dims[i] = fft_friendly_size(2 * maxm[i] + 1);
  return basis;
}

std::array<int, 3> fft_grid(const Cell& cell, double ecut_rho_ry) {
  PlaneWaveBasis b = build_basis(cell, Eigen::Vector3d::Zero(), ecut_rho_ry);
  return b.fft_dims;
}

std::vector<std::complex<double>> to_realspace(
    const PlaneWaveBasis& basis, const std::vector<std::complex<double>>& c,
    const Fft3d& fft) {
  if (c.size() != basis.size())
    throw InputError("coefficient count does not match basis size");
  std::vector<std::complex<double>> data(fft.size(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    data[grid_index(basis.millers[i], fft.dims())] += c[i];
  fft.backward(data);
  return data;
}

std::vector<std::complex<double>> to_reciprocal(
    const PlaneWaveBasis& basis, std::vector<std::complex<double>> field,
    const Fft3d& fft) {
  if (field.size() != fft.size())
    throw InputError("field size does not match FFT grid");
  fft.forward(field);
  std::vector<std::complex<double>> c(basis.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = field[grid_index(basis.millers[i], fft.dims())];
  return c;
}

std::complex<double> structure_factor(const std::vector<Eigen::Vector3d>& tau,
                                      const Eigen::Vector3d& g) {
  std::complex<double> s = 0.0;
  for (const auto& t : tau)
    s += std::exp(std::complex<double>(0.0, -g.dot(t)));
  return s;
}

void write_cube(std::ostream& os, const Cell& cell,
                const std::vector<double>& values, std::array<int, 3> dims,
                const std::string& comment) {
  const double ab = units::angstrom_in_bohr;
  os << "pwdesk volumetric data\n" << comment << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%5zu %11.6f %11.6f %11.6f\n", cell.natoms(),
                0.0, 0.0, 0.0);
  os << buf;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d ax = cell.lattice.row(i) * ab / dims[i];
    std::snprintf(buf, sizeof buf, "%5d %11.6f %11.6f %11.6f\n", dims[i],
                  ax[0], ax[1], ax[2]);
    os << buf;
  }
  for (std::size_t i = 0; i < cell.natoms(); ++i) {
    Eigen::Vector3d p = cell.positions[i] * ab;
    std::snprintf(buf, sizeof buf, "%5.0f %11.6f %11.6f %11.6f %11.6f\n",
                  cell.valence_electrons[i], cell.valence_electrons[i], p[0],
                  p[1], p[2]);
    os << buf;
  }
  std::size_t count = 0;
  for (int ix = 0; ix < dims[0]; ++ix)
    for (int iy = 0; iy < dims[1]; ++iy)
      for (int iz = 0; iz < dims[2]; ++iz) {
        std::size_t idx = (std::size_t(ix) * dims[1] + iy) * dims[2] + iz;
        std::snprintf(buf, sizeof buf, " %12.5e", values[idx]);
        os << buf;
        if (++count % 6 == 0) os << "\n";
      }
  if (count % 6 != 0) os << "\n";
}

} // namespace pwdesk
