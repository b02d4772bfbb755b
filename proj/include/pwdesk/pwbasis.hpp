#ifndef PWDESK_PWBASIS_HPP
#define PWDESK_PWBASIS_HPP

#include "pwdesk/fft.hpp"
#include "pwdesk/structure.hpp"

#include <array>
#include <complex>
#include <iosfwd>
#include <vector>

namespace pwdesk {

/// Plane-wave set at one k-point. Miller triples m satisfy
/// (1/2)|k+G|^2 <= ecut_wfc (Ry -> Ha internally) with G = m^T B.
/// Ordering is deterministic: ascending kinetic energy, ties broken
/// lexicographically by Miller index.
struct PlaneWaveBasis {
  Eigen::Vector3d k = Eigen::Vector3d::Zero();  // fractional
  std::vector<Eigen::Vector3i> millers;
  std::vector<double> kinetic;                  // (1/2)|k+G|^2 (Ha)
  double ecut_wfc = 0.0;                        // Ry
  std::array<int, 3> fft_dims = {1, 1, 1};
  Eigen::Matrix3d recip_bohr = Eigen::Matrix3d::Zero(); // rows b_i (Bohr^-1)

  std::size_t size() const { return millers.size(); }
  Eigen::Vector3d kplusg_cart(std::size_t i) const {
    return recip_bohr.transpose() * (k + millers[i].cast<double>());
  }
};

/// Real scalar field on the density FFT grid, x-major layout.
/// Values are electrons/Bohr^3; integral() is in electrons.
struct DensityGrid {
  std::array<int, 3> dims = {1, 1, 1};
  std::vector<double> values;
  double volume_bohr = 0.0;

  std::size_t size() const { return values.size(); }
  double cell_dv() const { return volume_bohr / double(size()); }
  double integral() const;
};

DensityGrid make_density_grid(const Cell& cell, std::array<int, 3> dims);

PlaneWaveBasis build_basis(const Cell& cell, const Eigen::Vector3d& k_frac,
                           double ecut_wfc_ry);

/// Density-grid dims for ecut_rho: per axis >= 2*maxmiller+1, rounded up
/// to 2,3,5-smooth sizes.
std::array<int, 3> fft_grid(const Cell& cell, double ecut_rho_ry);

/// f(r) = sum_G c_G exp(i G.r) sampled on `dims` (defaults to the basis
/// fft_dims). Coefficient count must equal the basis size.
std::vector<std::complex<double>> to_realspace(
    const PlaneWaveBasis& basis, const std::vector<std::complex<double>>& c,
    const Fft3d& fft);

/// Inverse of to_realspace restricted to the basis sphere.
std::vector<std::complex<double>> to_reciprocal(
    const PlaneWaveBasis& basis, std::vector<std::complex<double>> field,
    const Fft3d& fft);

/// S(G) = sum_atoms exp(-i G.tau); G cartesian, tau in matching units.
std::complex<double> structure_factor(const std::vector<Eigen::Vector3d>& tau,
                                      const Eigen::Vector3d& g);

/// Cube-style volumetric text block: header with atom count, origin and
/// axis vectors (Bohr), then z-fastest scalar values.
void write_cube(std::ostream& os, const Cell& cell,
                const std::vector<double>& values, std::array<int, 3> dims,
                const std::string& comment = "");

} // namespace pwdesk

#endif
