#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pwdesk/error.hpp"
#include "pwdesk/scf.hpp"
#include "pwdesk/units.hpp"

#include <cmath>
#include <random>

using namespace pwdesk;

namespace {

Cell cubic_cell_bohr(double L) {
  Cell cell;
  cell.lattice = Eigen::Matrix3d::Identity() * L * units::bohr_in_angstrom;
  return cell;
}

std::vector<double> smooth_potential(std::array<int, 3> dims, double v0) {
  std::vector<double> v(std::size_t(dims[0]) * dims[1] * dims[2]);
  std::size_t idx = 0;
  for (int ix = 0; ix < dims[0]; ++ix)
    for (int iy = 0; iy < dims[1]; ++iy)
      for (int iz = 0; iz < dims[2]; ++iz, ++idx) {
        double x = 2.0 * units::pi * ix / dims[0];
        double y = 2.0 * units::pi * iy / dims[1];
        double z = 2.0 * units::pi * iz / dims[2];
        v[idx] = v0 * (std::cos(x) + 0.6 * std::sin(y) +
                       0.3 * std::cos(y + z) + 0.2 * std::sin(x - z));
      }
  return v;
}

std::vector<std::complex<double>> random_state(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::complex<double>> c(n);
  double norm = 0.0;
  for (auto& x : c) {
    x = {g(rng), g(rng)};
    norm += std::norm(x);
  }
  for (auto& x : c) x /= std::sqrt(norm);
  return c;
}

// the model well system used across the SCF tests: one erf-screened
// two-electron pseudoatom in a small cubic box
ScfSystem model_well_system(double L = 8.0) {
  ScfSystem sys;
  sys.cell = cubic_cell_bohr(L);
  sys.cell.add_atom("X", Eigen::Vector3d::Zero(), 2.0);
  sys.pseudos["X"] = make_screened_model("X", 2.0, 1.0);
  sys.d2.elements["X"] = {10.0, 2.5};
  return sys;
}

ScfOptions model_well_options() {
  ScfOptions opt;
  opt.ecut_wfc = 10.0;
  opt.kgrid = {1, 1, 1};
  opt.xc = XcKind::pz;
  opt.use_d2 = false;
  return opt;
}

} // namespace

TEST_CASE("Methfessel-Paxton occupation") {
  CHECK(mp_occupation(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(mp_occupation(-12.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mp_occupation(12.0) == doctest::Approx(0.0).epsilon(1e-12));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 50; ++i) {
    double x = u(rng);
    CHECK(mp_occupation(x) + mp_occupation(-x) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
  // MP occupations may slightly leave [0,1]
  CHECK(mp_occupation(-1.0) > 1.0);
}

TEST_CASE("smearing kind parsing") {
  CHECK(parse_smearing("m-p") == SmearingKind::methfessel_paxton);
  CHECK(parse_smearing("mp") == SmearingKind::methfessel_paxton);
  CHECK(parse_smearing("Gaussian") == SmearingKind::gaussian);
  CHECK(parse_smearing("fermi-dirac") == SmearingKind::fermi_dirac);
  CHECK_THROWS_AS(parse_smearing("cold?"), InputError);
}

TEST_CASE("find_fermi insulating limit") {
  std::vector<std::vector<double>> eig = {{-1.0, 1.0}};
  std::vector<double> w = {1.0};
  double mu = find_fermi(eig, w, 2.0, 0.01);
  CHECK(std::abs(mu) < 0.5); // midgap
  CHECK(smearing_occupation(SmearingKind::methfessel_paxton,
                            (-1.0 - mu) / 0.01) == doctest::Approx(1.0));
  CHECK(smearing_occupation(SmearingKind::methfessel_paxton,
                            (1.0 - mu) / 0.01) == doctest::Approx(0.0));
}

TEST_CASE("find_fermi symmetric ladder half filling") {
  std::vector<std::vector<double>> eig = {{-0.3, -0.1, 0.1, 0.3}};
  std::vector<double> w = {1.0};
  double mu = find_fermi(eig, w, 4.0, 0.05);
  CHECK(mu == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("find_fermi random spectrum re-summation oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> eig(4);
  std::vector<double> w = {0.25, 0.25, 0.25, 0.25};
  for (auto& e : eig) {
    for (int n = 0; n < 10; ++n) e.push_back(u(rng));
    std::sort(e.begin(), e.end());
  }
  double sigma = 0.02, nelec = 7.0;
  double mu = find_fermi(eig, w, nelec, sigma);
  double count = 0.0;
  for (std::size_t k = 0; k < eig.size(); ++k)
    for (double e : eig[k])
      count += 2.0 * w[k] *
               smearing_occupation(SmearingKind::methfessel_paxton,
                                   (e - mu) / sigma);
  CHECK(std::abs(count - nelec) < 1e-10);
}

TEST_CASE("find_fermi insufficient bands") {
  std::vector<std::vector<double>> eig = {{0.0}};
  std::vector<double> w = {1.0};
  CHECK_THROWS_AS(find_fermi(eig, w, 4.0, 0.01), InputError);
}

TEST_CASE("mix_density") {
  Cell cell = cubic_cell_bohr(5.0);
  DensityGrid a = make_density_grid(cell, {2, 1, 1});
  DensityGrid b = a;
  a.values = {1.0, 3.0};
  b.values = {2.0, 5.0};
  DensityGrid m = mix_density(a, b, 0.7);
  CHECK(m.values[0] == doctest::Approx(0.7 * 2.0 + 0.3 * 1.0));
  CHECK(m.values[1] == doctest::Approx(0.7 * 5.0 + 0.3 * 3.0));
  CHECK(mix_density(a, b, 1.0).values == b.values);
  CHECK(mix_density(a, a, 0.7).values == a.values);
  DensityGrid c = make_density_grid(cell, {3, 1, 1});
  CHECK_THROWS_AS(mix_density(a, c, 0.5), InputError);
}

TEST_CASE("apply_hamiltonian free particle is diagonal") {
  Cell cell = cubic_cell_bohr(6.0);
  PlaneWaveBasis basis = build_basis(cell, Eigen::Vector3d::Zero(), 4.0);
  Fft3d fft(basis.fft_dims);
  std::vector<double> v(fft.size(), 0.0);
  auto psi = random_state(basis.size(), 7);
  auto h = apply_hamiltonian(basis, v, {}, psi, fft);
  for (std::size_t i = 0; i < basis.size(); ++i)
    CHECK(std::abs(h[i] - basis.kinetic[i] * psi[i]) < 1e-14);
}

TEST_CASE("apply_hamiltonian matches dense unit-vector oracle") {
  Cell cell = cubic_cell_bohr(6.0);
  // cutoff chosen so the basis has <= 8 vectors
  PlaneWaveBasis basis = build_basis(cell, Eigen::Vector3d::Zero(), 1.2);
  REQUIRE(basis.size() <= 8);
  std::array<int, 3> dims = {12, 12, 12};
  Fft3d fft(dims);
  auto v = smooth_potential(dims, 0.3);

  Eigen::MatrixXcd h(basis.size(), basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j) {
    std::vector<std::complex<double>> e(basis.size(), 0.0);
    e[j] = 1.0;
    auto col = apply_hamiltonian(basis, v, {}, e, fft);
    for (std::size_t i = 0; i < basis.size(); ++i) h(i, j) = col[i];
  }
  auto psi = random_state(basis.size(), 19);
  auto hp = apply_hamiltonian(basis, v, {}, psi, fft);
  Eigen::Map<Eigen::VectorXcd> p(psi.data(), psi.size());
  Eigen::VectorXcd ref = h * p;
  for (std::size_t i = 0; i < basis.size(); ++i)
    CHECK(std::abs(hp[i] - ref[i]) < 1e-12);

  // eigenvalues via the convolution-matrix assembly in diagonalize must
  // match the unit-vector oracle matrix
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  DiagResult d = diagonalize(basis, v, {}, int(basis.size()), fft);
  for (std::size_t i = 0; i < basis.size(); ++i)
    CHECK(d.eigenvalues[i] ==
          doctest::Approx(es.eigenvalues()[i]).epsilon(1e-12));
}

TEST_CASE("Hermiticity random-vector check with nonlocal projectors") {
  Cell cell = cubic_cell_bohr(7.0);
  PlaneWaveBasis basis = build_basis(cell, {0.25, 0.1, 0.0}, 6.0);
  std::array<int, 3> dims = {16, 16, 16};
  Fft3d fft(dims);
  auto v = smooth_potential(dims, 0.4);

  Pseudopotential ps = make_screened_model("X", 2.0, 0.8);
  ProjectorChannel ch0, ch1;
  ch0.l = 0;
  ch0.coupling = 0.7;
  ch1.l = 1;
  ch1.coupling = -0.4;
  for (double r : ps.r_grid) {
    ch0.beta.push_back(r * std::exp(-3.0 * r));
    ch1.beta.push_back(r * r * std::exp(-3.0 * r));
  }
  ps.projectors = {ch0, ch1};
  ps.r_c = 4.0;
  double ab = units::angstrom_in_bohr;
  double omega = cell.volume() * ab * ab * ab;
  ProjectorSet set =
      expand_projectors(ps, basis, omega, Eigen::Vector3d(1.0, 0.5, 2.0));

  for (unsigned seed = 0; seed < 5; ++seed) {
    auto phi = random_state(basis.size(), 100 + seed);
    auto psi = random_state(basis.size(), 200 + seed);
    auto hpsi = apply_hamiltonian(basis, v, {set}, psi, fft);
    auto hphi = apply_hamiltonian(basis, v, {set}, phi, fft);
    std::complex<double> a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      a += std::conj(phi[i]) * hpsi[i];
      b += std::conj(hphi[i]) * psi[i];
    }
    CHECK(std::abs(a - b) < 1e-10);
  }
}

TEST_CASE("diagonalize free-electron hexagonal cell") {
  Cell cell = build_hexagonal_cell(3.89, 12.0);
  PlaneWaveBasis basis = build_basis(cell, {1.0 / 3, 1.0 / 3, 0.0}, 8.0);
  Fft3d fft(basis.fft_dims);
  std::vector<double> v(fft.size(), 0.0);
  int nb = std::min<std::size_t>(10, basis.size());
  DiagResult d = diagonalize(basis, v, {}, nb, fft);
  for (int n = 0; n < nb; ++n)
    CHECK(d.eigenvalues[n] == doctest::Approx(basis.kinetic[n]).epsilon(1e-14));
}

TEST_CASE("Davidson path agrees with dense") {
  Cell cell = cubic_cell_bohr(8.0);
  PlaneWaveBasis basis = build_basis(cell, {0.1, 0.0, 0.0}, 8.0);
  std::array<int, 3> dims = {20, 20, 20};
  Fft3d fft(dims);
  auto v = smooth_potential(dims, 0.5);
  int nb = 6;
  DiagResult dense = diagonalize(basis, v, {}, nb, fft, basis.size());
  DiagResult iter = diagonalize(basis, v, {}, nb, fft, 1);
  CHECK(dense.dense);
  CHECK_FALSE(iter.dense);
  for (int n = 0; n < nb; ++n)
    CHECK(std::abs(dense.eigenvalues[n] - iter.eigenvalues[n]) < 1e-9);
  // orthonormality of the iterative eigenvectors
  Eigen::MatrixXcd gram = iter.vectors.adjoint() * iter.vectors;
  CHECK((gram - Eigen::MatrixXcd::Identity(nb, nb)).norm() < 1e-10);
}

TEST_CASE("diagonalize degenerate pair at symmetric k") {
  Cell cell = cubic_cell_bohr(8.0);
  // at k = (1/2,0,0) the G=0 and G=-b1 states are exactly degenerate
  PlaneWaveBasis basis = build_basis(cell, {0.5, 0.0, 0.0}, 6.0);
  std::array<int, 3> dims = {18, 18, 18};
  Fft3d fft(dims);
  auto v = smooth_potential(dims, 0.05);
  DiagResult d = diagonalize(basis, v, {}, 4, fft);
  CHECK(std::abs(d.eigenvalues[0] - d.eigenvalues[1]) <
        2.0 * 0.05 + 1e-10); // split only by the potential
  std::vector<double> vz(fft.size(), 0.0);
  DiagResult free_d = diagonalize(basis, vz, {}, 4, fft);
  CHECK(std::abs(free_d.eigenvalues[0] - free_d.eigenvalues[1]) < 1e-10);
}

TEST_CASE("initial density integrates to the valence charge") {
  Cell cell = build_hexagonal_cell(3.89, 15.0);
  cell.add_atom("Ga", {0.0, 0.0, 0.0}, 3.0);
  cell.add_atom("P", {0.0, 2.245892547, 0.38}, 5.0);
  DensityGrid n = initial_density(cell, {18, 18, 60});
  CHECK(n.integral() == doctest::Approx(8.0).epsilon(1e-8));
  for (double v : n.values) CHECK(v >= 0.0);
}

TEST_CASE("local potential mean equals the alpha term") {
  double L = 9.0;
  Cell cell = cubic_cell_bohr(L);
  cell.add_atom("X", {1.0, 0.7, 0.3}, 2.0);
  double sigma = 0.9, z = 2.0;
  std::map<std::string, Pseudopotential> pseudos;
  pseudos["X"] = make_screened_model("X", z, sigma);
  auto v = local_potential(cell, pseudos, {20, 20, 20});
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double alpha = units::pi * z * sigma * sigma / (L * L * L);
  CHECK(mean == doctest::Approx(alpha).epsilon(1e-6));
}

TEST_CASE("scf free-electron fixed point") {
  ScfSystem sys;
  sys.cell = cubic_cell_bohr(8.0);
  sys.extra_electrons = 4.0;
  ScfOptions opt;
  opt.ecut_wfc = 8.0;
  opt.use_xc = false;
  opt.use_d2 = false;
  opt.n_bands = 8;
  ScfResult res = scf_loop(sys, opt);
  CHECK(res.converged);
  CHECK(res.iterations <= 2);
  // 2 electrons in G=0, 2 shared across the six-fold degenerate first shell
  double t1 = 0.5 * std::pow(2.0 * units::pi / 8.0, 2);
  CHECK(res.total_energy == doctest::Approx(2.0 * t1).epsilon(1e-10));
  CHECK(res.components.kinetic == doctest::Approx(res.total_energy));
  CHECK(res.components.hartree == doctest::Approx(0.0));
  // degenerate levels share occupation equally
  auto& occ = res.solution.occupations[0];
  for (int n = 2; n < 7; ++n)
    CHECK(occ[n] == doctest::Approx(occ[1]).epsilon(1e-10));
}

TEST_CASE("scf model well converges and restarts idempotently") {
  ScfSystem sys = model_well_system();
  ScfOptions opt = model_well_options();
  ScfResult res = scf_loop(sys, opt);
  CHECK(res.converged);
  CHECK(res.iterations <= 100);

  // conv_thr honored on the last step
  std::size_t n = res.energy_history.size();
  REQUIRE(n >= 2);
  CHECK(std::abs(res.energy_history[n - 1] - res.energy_history[n - 2]) <
        units::ry_to_hartree(opt.conv_thr));

  // electron count conservation
  double count = 0.0;
  for (std::size_t ik = 0; ik < res.solution.occupations.size(); ++ik)
    for (double f : res.solution.occupations[ik]) count += 2.0 * f;
  CHECK(std::abs(count - 2.0) < 1e-8);

  // orthonormal coefficients
  const auto& c = res.solution.coefficients[0];
  Eigen::MatrixXcd gram = c.adjoint() * c;
  CHECK((gram - Eigen::MatrixXcd::Identity(c.cols(), c.cols())).norm() <
        1e-10);

  // restart from the converged density reproduces the energy
  ScfResult res2 = scf_loop(sys, opt, &res.final_density);
  CHECK(res2.converged);
  CHECK(res2.iterations <= 4);
  CHECK(std::abs(res2.total_energy - res.total_energy) < 1e-10);

  // iteration log is tab-separated with four fields per line
  CHECK(res.iteration_log.rfind("# iter", 0) == 0);
  std::istringstream is(res.iteration_log);
  std::string first_line, data_line;
  std::getline(is, first_line);
  std::getline(is, data_line);
  CHECK(std::count(data_line.begin(), data_line.end(), '\t') == 3);
}

TEST_CASE("scf dispersion component isolation") {
  ScfSystem sys = model_well_system();
  ScfOptions opt = model_well_options();
  ScfResult base = scf_loop(sys, opt);

  ScfOptions with_d2 = opt;
  with_d2.use_d2 = true;
  with_d2.d2_cutoff = 30.0;
  ScfResult disp = scf_loop(sys, with_d2, &base.final_density);
  double e_d2 = grimme_d2(sys.cell, sys.d2, 30.0);
  CHECK(base.components.dispersion == 0.0);
  CHECK(disp.components.dispersion == doctest::Approx(e_d2).epsilon(1e-14));
  CHECK(disp.total_energy - base.total_energy ==
        doctest::Approx(e_d2).epsilon(1e-8));
}

TEST_CASE("scf invariant under rigid translation") {
  ScfSystem sys = model_well_system();
  ScfOptions opt = model_well_options();
  opt.conv_thr = 1e-10; // eigenvalues are first order in the residual
  ScfResult a = scf_loop(sys, opt);

  ScfSystem shifted = sys;
  shifted.cell = cubic_cell_bohr(8.0);
  Eigen::Vector3d t =
      sys.cell.lattice.row(0) * 0.25 + sys.cell.lattice.row(2) * 0.5;
  shifted.cell.add_atom("X", t, 2.0);
  ScfResult b = scf_loop(shifted, opt);
  CHECK(std::abs(a.total_energy - b.total_energy) < 1e-9);
  for (std::size_t n = 0; n < a.solution.eigenvalues[0].size(); ++n)
    CHECK(std::abs(a.solution.eigenvalues[0][n] -
                   b.solution.eigenvalues[0][n]) < 1e-9);
}

TEST_CASE("scf error paths") {
  ScfSystem sys = model_well_system();
  sys.pseudos.clear();
  CHECK_THROWS_AS(scf_loop(sys, model_well_options()), DependencyError);

  ScfSystem empty;
  empty.cell = cubic_cell_bohr(6.0);
  CHECK_THROWS_AS(scf_loop(empty, model_well_options()), InputError);

  ScfSystem sys2 = model_well_system();
  ScfOptions bad = model_well_options();
  bad.ecut_rho = 2.0; // below ecut_wfc
  CHECK_THROWS_AS(scf_loop(sys2, bad), InputError);
}
