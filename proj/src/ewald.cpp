#include "pwdesk/ewald.hpp"

#include "pwdesk/error.hpp"
#include "pwdesk/units.hpp"

#include <cmath>
#include <complex>

namespace pwdesk {

namespace {
constexpr double tail_log = 36.8; // exp(-36.8) ~ 1e-16 per-term tail
}

double ewald_auto_eta(const Cell& cell, std::size_t n_atoms) {
  double omega = cell.volume() / std::pow(units::bohr_in_angstrom, 3);
  double n = static_cast<double>(std::max<std::size_t>(n_atoms, 1));
  // balances O(N^2 rc^3/Omega) real-space work against O(Omega Gc^3)
  // reciprocal work
  return std::sqrt(units::pi) * std::cbrt(n / (omega * omega));
}

double ewald_energy(const Cell& cell, const std::vector<double>& charges,
                    double eta, bool allow_background) {
  const std::size_t nat = charges.size();
  if (nat != cell.species.size())
    throw InputError("ewald_energy: charge count does not match atom count");
  if (nat == 0) return 0.0;

  double qtot = 0.0, q2 = 0.0;
  for (double q : charges) {
    qtot += q;
    q2 += q * q;
  }
  if (!allow_background && std::abs(qtot) > 1e-8)
    throw InputError("ewald_energy: cell is not charge neutral (total charge " +
                     std::to_string(qtot) +
                     "); pass allow_background to imply a compensating jellium");

  if (eta <= 0.0) eta = ewald_auto_eta(cell, nat);
  const double sqrt_eta = std::sqrt(eta);

  const double to_bohr = 1.0 / units::bohr_in_angstrom;
  Eigen::Matrix3d lat = cell.lattice * to_bohr; // rows a1..a3, Bohr
  Eigen::Matrix3d recip = reciprocal_lattice(cell) / to_bohr; // rows b, Bohr^-1
  const double omega = std::abs(lat.determinant());

  std::vector<Eigen::Vector3d> tau(nat);
  for (std::size_t i = 0; i < nat; ++i)
    tau[i] = cell.positions[i] * to_bohr;

  // real-space sum
  const double r_cut = std::sqrt(tail_log / eta);
  int n_img[3];
  for (int d = 0; d < 3; ++d) {
    double plane_sep = 2.0 * units::pi / recip.row(d).norm();
    n_img[d] = static_cast<int>(std::ceil(r_cut / plane_sep)) + 1;
  }
  double e_real = 0.0;
  for (int l1 = -n_img[0]; l1 <= n_img[0]; ++l1)
    for (int l2 = -n_img[1]; l2 <= n_img[1]; ++l2)
      for (int l3 = -n_img[2]; l3 <= n_img[2]; ++l3) {
        Eigen::Vector3d shift =
            l1 * lat.row(0) + l2 * lat.row(1) + l3 * lat.row(2);
        bool home = (l1 == 0 && l2 == 0 && l3 == 0);
        for (std::size_t i = 0; i < nat; ++i)
          for (std::size_t j = 0; j < nat; ++j) {
            if (home && i == j) continue;
            double r = (tau[i] - tau[j] + shift).norm();
            if (r > r_cut) continue;
            e_real += 0.5 * charges[i] * charges[j] *
                      std::erfc(sqrt_eta * r) / r;
          }
      }

  // reciprocal-space sum
  const double g_cut = 2.0 * sqrt_eta * std::sqrt(tail_log);
  int n_rec[3];
  for (int d = 0; d < 3; ++d)
    n_rec[d] = static_cast<int>(std::ceil(g_cut * lat.row(d).norm() /
                                          (2.0 * units::pi))) +
               1;
  double e_recip = 0.0;
  for (int m1 = -n_rec[0]; m1 <= n_rec[0]; ++m1)
    for (int m2 = -n_rec[1]; m2 <= n_rec[1]; ++m2)
      for (int m3 = -n_rec[2]; m3 <= n_rec[2]; ++m3) {
        if (m1 == 0 && m2 == 0 && m3 == 0) continue;
        Eigen::Vector3d g =
            m1 * recip.row(0) + m2 * recip.row(1) + m3 * recip.row(2);
        double g2 = g.squaredNorm();
        if (g2 > g_cut * g_cut) continue;
        std::complex<double> s(0.0, 0.0);
        for (std::size_t i = 0; i < nat; ++i)
          s += charges[i] * std::exp(std::complex<double>(0.0, g.dot(tau[i])));
        e_recip += 2.0 * units::pi / omega * std::exp(-g2 / (4.0 * eta)) /
                   g2 * std::norm(s);
      }

  double e_self = -sqrt_eta / std::sqrt(units::pi) * q2;
  double e_bg = -units::pi * qtot * qtot / (2.0 * eta * omega);

  return e_real + e_recip + e_self + e_bg;
}

double ewald_energy(const Cell& cell, double eta, bool allow_background) {
  return ewald_energy(cell, cell.valence_electrons, eta, allow_background);
}

} // namespace pwdesk
