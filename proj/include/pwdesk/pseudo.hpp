#ifndef PWDESK_PSEUDO_HPP
#define PWDESK_PSEUDO_HPP

#include "pwdesk/pwbasis.hpp"

#include <complex>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pwdesk {

/// Metadata parsed from a UPF-style filename, material.explanation.UPF.
struct PseudoMeta {
  std::string element;
  bool relativistic = false;
  std::string xc_tag;                    // pbe, pz, vwn, coulomb, blyp, pw91
  std::set<char> state_tags;             // s, p, d, f, n
  std::vector<std::string> origin_tags;  // version/author/method tokens
  bool element_known = true;
};

PseudoMeta parse_upf_name(const std::string& filename);

/// One separable (Kleinman-Bylander style) nonlocal channel: a single
/// projector per angular momentum.
struct ProjectorChannel {
  int l = 0;
  std::vector<double> beta; // on r_grid (Bohr^-3/2 scale, tabulated)
  double coupling = 0.0;    // D_l (Hartree)
};

/// Norm-conserving pseudopotential on a radial mesh, atomic units.
struct Pseudopotential {
  std::string element;
  double z_valence = 0.0;
  double r_c = 0.0;                   // Bohr
  std::vector<double> r_grid;         // strictly increasing, > 0
  std::vector<double> v_local;        // Hartree
  std::vector<ProjectorChannel> projectors;
  std::vector<double> reference_norms; // per channel, optional (empty = none)

  void validate() const;
};

Pseudopotential load_pseudo(const std::string& path);
Pseudopotential parse_pseudo(std::istream& is, const std::string& name);
void save_pseudo(std::ostream& os, const Pseudopotential& ps);

/// Analytic models used throughout the test suite.
Pseudopotential make_coulomb_model(const std::string& element, double z,
                                   int npoints = 800, double rmax = 40.0);
Pseudopotential make_screened_model(const std::string& element, double z,
                                    double sigma, int npoints = 1200,
                                    double rmax = 40.0);

struct NormCheckResult {
  std::vector<double> deviation;  // per channel; NaN when unchecked
  std::vector<bool> checked;
  bool pass = true;
};

/// 4 pi integral of |psi_l|^2 r^2 up to r_c against the stored reference
/// charge, trapezoidal rule on the file's mesh.
NormCheckResult check_norm_conservation(
    const Pseudopotential& ps,
    const std::vector<std::vector<double>>& pseudo_wf,
    double tolerance = 1e-3);

/// (d psi / d r) / psi at grid index i (interior), centered differences on
/// the nonuniform mesh.
double log_derivative(const std::vector<double>& radial_wf,
                      const std::vector<double>& r_grid, std::size_t i);

/// Radial Fourier transform of the local potential:
///   G != 0: (4 pi / Omega) Int [v + z/r] sin(Gr)/(Gr) r^2 dr - 4 pi z/(Omega G^2)
///   G == 0: (4 pi / Omega) Int [v + z/r] r^2 dr   (alpha term; the Coulomb
///           divergence cancels against the Hartree/Ewald G=0 conventions)
double vloc_reciprocal(const Pseudopotential& ps, double omega_bohr,
                       double gnorm);

/// Nonlocal projectors expanded on a plane-wave basis for one atom; one
/// rank-1 term per (l, m).
struct ProjectorSet {
  std::vector<std::vector<std::complex<double>>> beta; // per term, basis-sized
  std::vector<double> coupling;                        // D for each term
};

ProjectorSet expand_projectors(const Pseudopotential& ps,
                               const PlaneWaveBasis& basis, double omega_bohr,
                               const Eigen::Vector3d& tau_bohr);

/// V_NL psi = sum_t D_t beta_t <beta_t|psi>.
std::vector<std::complex<double>> kb_apply(
    const ProjectorSet& set, const std::vector<std::complex<double>>& psi);

} // namespace pwdesk

#endif
