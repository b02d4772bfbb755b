#ifndef PWDESK_SCF_HPP
#define PWDESK_SCF_HPP

#include "pwdesk/d2.hpp"
#include "pwdesk/kgrid.hpp"
#include "pwdesk/pseudo.hpp"
#include "pwdesk/xc.hpp"

#include <map>
#include <string>
#include <vector>

namespace pwdesk {

enum class SmearingKind { methfessel_paxton, gaussian, fermi_dirac };

/// Accepts the deck spellings: 'm-p'/'mp'/'methfessel-paxton',
/// 'gauss'/'gaussian', 'fd'/'fermi-dirac'.
SmearingKind parse_smearing(const std::string& key);

/// First-order Methfessel-Paxton occupation,
/// f = erfc(x)/2 - x exp(-x^2)/(2 sqrt(pi)). May slightly leave [0,1].
double mp_occupation(double x);

double smearing_occupation(SmearingKind kind, double x);

/// Free-energy correction integrand (the -sigma*S term is
/// sigma * sum_k w_k * 2 * this); logged, not added to the total.
double smearing_correction(SmearingKind kind, double x);

/// Bisection on mu until |sum_k w_k sum_n 2 f((e-mu)/sigma) - n_electrons|
/// < 1e-10. Throws InputError when the bands cannot hold the electrons.
double find_fermi(const std::vector<std::vector<double>>& eigenvalues,
                  const std::vector<double>& weights, double n_electrons,
                  double sigma_ha,
                  SmearingKind kind = SmearingKind::methfessel_paxton);

/// H psi with H = (1/2)|k+G|^2 + v_eff (multiplied on the fft grid)
/// + separable nonlocal terms. v_eff is real, on the fft grid.
std::vector<std::complex<double>> apply_hamiltonian(
    const PlaneWaveBasis& basis, const std::vector<double>& v_eff,
    const std::vector<ProjectorSet>& nonlocal,
    const std::vector<std::complex<double>>& psi, const Fft3d& fft);

struct DiagResult {
  std::vector<double> eigenvalues; // ascending, Ha
  Eigen::MatrixXcd vectors;        // basis x n_bands, orthonormal
  bool dense = true;               // which path produced the result
};

/// Lowest n_bands eigenpairs. Dense solve when the basis is at most
/// dense_threshold vectors, otherwise a Davidson iteration with residual
/// norms below 1e-8 (falling back to dense on non-convergence).
DiagResult diagonalize(const PlaneWaveBasis& basis,
                       const std::vector<double>& v_eff,
                       const std::vector<ProjectorSet>& nonlocal, int n_bands,
                       const Fft3d& fft, std::size_t dense_threshold = 2000);

/// n_next = beta n_out + (1-beta) n_in.
DensityGrid mix_density(const DensityGrid& n_in, const DensityGrid& n_out,
                        double beta);

struct KsSolution {
  std::vector<std::vector<double>> eigenvalues; // per k, ascending (Ha)
  std::vector<Eigen::MatrixXcd> coefficients;   // per k, basis x bands
  std::vector<std::vector<double>> occupations; // per k, per band in ~[0,1]
  double fermi_level = 0.0;                     // Ha
};

struct EnergyComponents {
  double kinetic = 0.0;
  double local_pseudo = 0.0;
  double hartree = 0.0;
  double xc = 0.0;
  double nonlocal = 0.0;
  double ewald = 0.0;
  double dispersion = 0.0;

  double total() const {
    return kinetic + local_pseudo + hartree + xc + nonlocal + ewald +
           dispersion;
  }
};

struct ScfSystem {
  Cell cell;
  std::map<std::string, Pseudopotential> pseudos; // by species
  D2Params d2 = default_d2_params();
  double extra_electrons = 0.0; // jellium electrons with no ions
};

struct ScfOptions {
  double ecut_wfc = 30.0;  // Ry
  double ecut_rho = 0.0;   // Ry; 0 selects 4x ecut_wfc
  std::array<int, 3> kgrid = {1, 1, 1};
  double degauss = 0.0005; // Ry
  SmearingKind smearing = SmearingKind::methfessel_paxton;
  double mixing_beta = 0.7;
  double conv_thr = 1e-8;  // Ry
  int max_iter = 100;
  int n_bands = 0;         // 0 = nelec/2 plus a margin
  std::size_t dense_threshold = 2000;
  XcKind xc = XcKind::pbe;
  bool use_xc = true;
  bool use_d2 = true;
  double d2_cutoff = 50.0; // Ang
  bool parallel = true;
};

struct ScfResult {
  bool converged = false;
  int iterations = 0;
  double total_energy = 0.0; // Ha
  EnergyComponents components;
  std::vector<double> energy_history; // per iteration (Ha)
  DensityGrid final_density;
  KsSolution solution;
  double smearing_free_energy = 0.0; // -sigma S, logged separately (Ha)
  std::string iteration_log;         // TSV: iter, E, |dE|, clamped fraction
};

/// Superposition of per-atom normalized Gaussians carrying z_valence
/// electrons, width 1 Bohr, assembled in reciprocal space.
DensityGrid initial_density(const Cell& cell, std::array<int, 3> dims,
                            double width_bohr = 1.0);

/// Total local pseudopotential on the grid (Ha), via vloc_reciprocal and
/// per-species structure factors; includes the G=0 alpha term.
std::vector<double> local_potential(
    const Cell& cell, const std::map<std::string, Pseudopotential>& pseudos,
    std::array<int, 3> dims);

struct EffectivePotential {
  std::vector<double> v_loc;
  std::vector<double> v_hxc;  // v_H + v_xc
  std::vector<double> v_eff;  // v_loc + v_hxc
  double e_hartree = 0.0;
  double e_xc = 0.0;
  std::size_t clamped_points = 0;
};

EffectivePotential build_effective_potential(const ScfSystem& sys,
                                             const DensityGrid& density,
                                             XcKind xc,
                                             const std::vector<double>& v_loc);

ScfResult scf_loop(const ScfSystem& system, const ScfOptions& opt,
                   const DensityGrid* restart_density = nullptr);

} // namespace pwdesk

#endif
