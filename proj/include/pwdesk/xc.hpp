#ifndef PWDESK_XC_HPP
#define PWDESK_XC_HPP

#include "pwdesk/fft.hpp"
#include "pwdesk/pwbasis.hpp"

#include <string>
#include <vector>

namespace pwdesk {

enum class XcKind { pz, pbe };

XcKind parse_xc_kind(const std::string& deck_key); // 'pz' or 'pbe'

/// Pointwise functional value and derivatives of f = n*eps:
///   dfdn   = partial f / partial n        (at fixed |grad n|)
///   dfdg   = partial f / partial |grad n|
struct XcPoint {
  double eps = 0.0;
  double dfdn = 0.0;
  double dfdg = 0.0;
};

XcPoint lda_exchange(double n);
XcPoint pz_correlation(double n);
XcPoint pw92_correlation(double n); // uniform limit used inside PBE
XcPoint pbe_exchange(double n, double gn);
XcPoint pbe_correlation(double n, double gn);

/// Grid-level result. potential includes the gradient (divergence) term for
/// GGA, assembled in reciprocal space with the same spectral operator used
/// for |grad n|.
struct XcResult {
  std::vector<double> energy_density; // eps_xc per point (Ha per electron)
  std::vector<double> potential;      // v_xc per point (Ha)
  double total = 0.0;                 // integrated E_xc (Ha)
  std::size_t clamped_points = 0;     // negative densities clamped to 0
};

XcResult evaluate_xc(XcKind kind, const DensityGrid& density, const Cell& cell,
                     bool parallel = true);

/// Spectral gradient magnitude |grad n| on the density grid (Bohr^-4).
std::vector<double> density_gradient_norm(const DensityGrid& density,
                                          const Cell& cell);

struct HartreeResult {
  std::vector<double> potential; // V_H on the grid (Ha)
  double energy = 0.0;           // E_H (Ha)
};

/// V_H(G) = 4 pi n(G)/G^2, V_H(G=0) = 0 (jellium convention, paired with
/// the Ewald and local-pseudopotential G=0 terms). E_H = (1/2) Int n V_H.
HartreeResult hartree(const DensityGrid& density, const Cell& cell);

} // namespace pwdesk

#endif
