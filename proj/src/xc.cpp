#include "pwdesk/xc.hpp"
#include "pwdesk/error.hpp"
#include "pwdesk/structure.hpp"
#include "pwdesk/units.hpp"

#include <cmath>
#include <complex>

namespace pwdesk {

namespace {

constexpr double vacuum_floor = 1e-12;

// Slater exchange prefactor -(3/4)(3/pi)^(1/3)
const double cx = -0.75 * std::cbrt(3.0 / units::pi);

// Perdew-Zunger correlation, unpolarized (Hartree)
constexpr double pz_a = 0.0311, pz_b = -0.048, pz_c = 0.0020, pz_d = -0.0116;
constexpr double pz_gamma = -0.1423, pz_beta1 = 1.0529, pz_beta2 = 0.3334;

// PW92 correlation, unpolarized
constexpr double pw_a = 0.031091, pw_alpha1 = 0.21370;
constexpr double pw_beta1 = 7.5957, pw_beta2 = 3.5876, pw_beta3 = 1.6382,
                 pw_beta4 = 0.49294;

// PBE constants
constexpr double pbe_kappa = 0.804, pbe_mu = 0.2195149727645171;
constexpr double pbe_beta = 0.066725;
const double pbe_gamma = (1.0 - std::log(2.0)) / (units::pi * units::pi);

double rs_of(double n) {
  return std::cbrt(3.0 / (4.0 * units::pi * n));
}

// ec and dec/drs for PW92
void pw92(double rs, double& ec, double& dec) {
  double sq = std::sqrt(rs);
  double q = 2.0 * pw_a *
             (pw_beta1 * sq + pw_beta2 * rs + pw_beta3 * rs * sq +
              pw_beta4 * rs * rs);
  double dq = 2.0 * pw_a *
              (0.5 * pw_beta1 / sq + pw_beta2 + 1.5 * pw_beta3 * sq +
               2.0 * pw_beta4 * rs);
  double lg = std::log(1.0 + 1.0 / q);
  ec = -2.0 * pw_a * (1.0 + pw_alpha1 * rs) * lg;
  dec = -2.0 * pw_a * pw_alpha1 * lg +
        2.0 * pw_a * (1.0 + pw_alpha1 * rs) * dq / (q * (q + 1.0));
}

} // namespace

XcKind parse_xc_kind(const std::string& key) {
  if (key == "pz") return XcKind::pz;
  if (key == "pbe") return XcKind::pbe;
  throw InputError("unsupported input_dft '" + key + "' (accepted: pz, pbe)");
}

XcPoint lda_exchange(double n) {
  if (n < vacuum_floor) return {};
  XcPoint p;
  p.eps = cx * std::cbrt(n);
  p.dfdn = 4.0 / 3.0 * p.eps;
  return p;
}

XcPoint pz_correlation(double n) {
  if (n < vacuum_floor) return {};
  XcPoint p;
  double rs = rs_of(n);
  if (rs < 1.0) {
    double lg = std::log(rs);
    p.eps = pz_a * lg + pz_b + pz_c * rs * lg + pz_d * rs;
    p.dfdn = pz_a * lg + (pz_b - pz_a / 3.0) +
             2.0 / 3.0 * pz_c * rs * lg + (2.0 * pz_d - pz_c) * rs / 3.0;
  } else {
    double sq = std::sqrt(rs);
    double den = 1.0 + pz_beta1 * sq + pz_beta2 * rs;
    p.eps = pz_gamma / den;
    p.dfdn = p.eps *
             (1.0 + 7.0 / 6.0 * pz_beta1 * sq + 4.0 / 3.0 * pz_beta2 * rs) /
             den;
  }
  return p;
}

XcPoint pw92_correlation(double n) {
  if (n < vacuum_floor) return {};
  XcPoint p;
  double rs = rs_of(n);
  double ec, dec;
  pw92(rs, ec, dec);
  p.eps = ec;
  p.dfdn = ec - rs / 3.0 * dec;
  return p;
}

XcPoint pbe_exchange(double n, double gn) {
  if (n < vacuum_floor) return {};
  XcPoint p;
  double n13 = std::cbrt(n);
  double kf2 = std::pow(3.0 * units::pi * units::pi, 2.0 / 3.0) * n13 * n13;
  // s^2 = gn^2 / (2 kF n)^2
  double denom = 4.0 * kf2 * n * n;
  double s2 = gn * gn / denom;
  double fx = 1.0 + pbe_kappa -
              pbe_kappa / (1.0 + pbe_mu * s2 / pbe_kappa);
  double dfds2 = pbe_mu / std::pow(1.0 + pbe_mu * s2 / pbe_kappa, 2);
  p.eps = cx * n13 * fx;
  p.dfdn = 4.0 / 3.0 * cx * n13 * (fx - 2.0 * s2 * dfds2);
  p.dfdg = cx * n13 * n * dfds2 * 2.0 * gn / denom;
  return p;
}

XcPoint pbe_correlation(double n, double gn) {
  if (n < vacuum_floor) return {};
  XcPoint p;
  double rs = rs_of(n);
  double ec, dec;
  pw92(rs, ec, dec);

  double kf = std::cbrt(3.0 * units::pi * units::pi * n);
  double ks = std::sqrt(4.0 * kf / units::pi);
  double t = gn / (2.0 * ks * n);
  double u = t * t;

  double bg = pbe_beta / pbe_gamma;
  double w = std::exp(-ec / pbe_gamma);
  double A = bg / (w - 1.0);
  double Dd = 1.0 + A * u + A * A * u * u;
  double q = (1.0 + A * u) / Dd;
  double arg = bg * u * q;
  double H = pbe_gamma * std::log(1.0 + arg);

  double pref = pbe_gamma / (1.0 + arg) * bg;
  double dqdu = (A * Dd - (1.0 + A * u) * (A + 2.0 * A * A * u)) / (Dd * Dd);
  double dqdA = (u * Dd - (1.0 + A * u) * (u + 2.0 * A * u * u)) / (Dd * Dd);
  double dHdu = pref * (q + u * dqdu);
  double dHdA = pref * u * dqdA;
  double dAdec = A * w / (pbe_gamma * (w - 1.0));

  double drs_dn = -rs / (3.0 * n);
  double du_dn = -7.0 / 3.0 * u / n;
  double du_dg = t / (ks * n);
  double dH_dn = dHdu * du_dn + dHdA * dAdec * dec * drs_dn;

  p.eps = ec + H;
  p.dfdn = ec + H + n * (dec * drs_dn + dH_dn);
  p.dfdg = n * dHdu * du_dg;
  return p;
}

namespace {

// Miller index for FFT bin i on an n-point axis.
inline int fft_miller(int i, int n) { return (i <= n / 2) ? i : i - n; }

// Gradient components of a real grid field via the spectral operator.
std::array<std::vector<double>, 3> spectral_gradient(
    const DensityGrid& density, const Cell& cell) {
  const auto d = density.dims;
  Fft3d fft(d);
  Eigen::Matrix3d recip =
      reciprocal_lattice(cell) * units::bohr_in_angstrom; // Bohr^-1
  std::vector<std::complex<double>> ng(density.values.begin(),
                                       density.values.end());
  fft.forward(ng);

  std::array<std::vector<double>, 3> grad;
  for (int c = 0; c < 3; ++c) {
    std::vector<std::complex<double>> comp(ng.size());
    std::size_t idx = 0;
    for (int ix = 0; ix < d[0]; ++ix)
      for (int iy = 0; iy < d[1]; ++iy)
        for (int iz = 0; iz < d[2]; ++iz, ++idx) {
          Eigen::Vector3d g = recip.transpose() *
                              Eigen::Vector3d(fft_miller(ix, d[0]),
                                              fft_miller(iy, d[1]),
                                              fft_miller(iz, d[2]));
          comp[idx] = std::complex<double>(0.0, g[c]) * ng[idx];
        }
    fft.backward(comp);
    grad[c].resize(comp.size());
    for (std::size_t i = 0; i < comp.size(); ++i) grad[c][i] = comp[i].real();
  }
  return grad;
}

} // namespace

std::vector<double> density_gradient_norm(const DensityGrid& density,
                                          const Cell& cell) {
  auto g = spectral_gradient(density, cell);
  std::vector<double> norm(density.size());
  for (std::size_t i = 0; i < norm.size(); ++i)
    norm[i] = std::sqrt(g[0][i] * g[0][i] + g[1][i] * g[1][i] +
                        g[2][i] * g[2][i]);
  return norm;
}

XcResult evaluate_xc(XcKind kind, const DensityGrid& density, const Cell& cell,
                     bool parallel) {
  const std::size_t npts = density.size();
  XcResult res;
  res.energy_density.resize(npts);
  res.potential.resize(npts);

  std::array<std::vector<double>, 3> grad;
  std::vector<double> gn;
  if (kind == XcKind::pbe) {
    grad = spectral_gradient(density, cell);
    gn.resize(npts);
    for (std::size_t i = 0; i < npts; ++i)
      gn[i] = std::sqrt(grad[0][i] * grad[0][i] + grad[1][i] * grad[1][i] +
                        grad[2][i] * grad[2][i]);
  }

  std::vector<double> dfdg(kind == XcKind::pbe ? npts : 0, 0.0);
  std::size_t clamped = 0;

#pragma omp parallel for schedule(static) reduction(+ : clamped) \
    if (parallel)
  for (long long i = 0; i < (long long)npts; ++i) {
    double n = density.values[i];
    if (n < 0.0) {
      n = 0.0;
      ++clamped;
    }
    if (kind == XcKind::pz) {
      XcPoint x = lda_exchange(n);
      XcPoint c = pz_correlation(n);
      res.energy_density[i] = x.eps + c.eps;
      res.potential[i] = x.dfdn + c.dfdn;
    } else {
      XcPoint x = pbe_exchange(n, gn[i]);
      XcPoint c = pbe_correlation(n, gn[i]);
      res.energy_density[i] = x.eps + c.eps;
      res.potential[i] = x.dfdn + c.dfdn;
      dfdg[i] = x.dfdg + c.dfdg;
    }
  }
  res.clamped_points = clamped;

  if (kind == XcKind::pbe) {
    // v -= div( dfdg * grad n / |grad n| ), assembled spectrally
    const auto d = density.dims;
    Fft3d fft(d);
    Eigen::Matrix3d recip = reciprocal_lattice(cell) * units::bohr_in_angstrom;
    std::vector<std::complex<double>> div(npts, 0.0);
    for (int c = 0; c < 3; ++c) {
      std::vector<std::complex<double>> comp(npts);
      for (std::size_t i = 0; i < npts; ++i) {
        double a = gn[i] > 1e-30 ? dfdg[i] * grad[c][i] / gn[i] : 0.0;
        comp[i] = a;
      }
      fft.forward(comp);
      std::size_t idx = 0;
      for (int ix = 0; ix < d[0]; ++ix)
        for (int iy = 0; iy < d[1]; ++iy)
          for (int iz = 0; iz < d[2]; ++iz, ++idx) {
            Eigen::Vector3d g = recip.transpose() *
                                Eigen::Vector3d(fft_miller(ix, d[0]),
                                                fft_miller(iy, d[1]),
                                                fft_miller(iz, d[2]));
            comp[idx] *= std::complex<double>(0.0, g[c]);
          }
      fft.backward(comp);
      for (std::size_t i = 0; i < npts; ++i) div[i] += comp[i];
    }
    for (std::size_t i = 0; i < npts; ++i)
      res.potential[i] -= div[i].real();
  }

  double dv = density.cell_dv();
  double tot = 0.0;
  for (std::size_t i = 0; i < npts; ++i) {
    double n = std::max(density.values[i], 0.0);
    tot += n * res.energy_density[i];
  }
  res.total = tot * dv;
  return res;
}

HartreeResult hartree(const DensityGrid& density, const Cell& cell) {
  const auto d = density.dims;
  Fft3d fft(d);
  Eigen::Matrix3d recip = reciprocal_lattice(cell) * units::bohr_in_angstrom;
  std::vector<std::complex<double>> ng(density.values.begin(),
                                       density.values.end());
  fft.forward(ng);
  std::size_t idx = 0;
  for (int ix = 0; ix < d[0]; ++ix)
    for (int iy = 0; iy < d[1]; ++iy)
      for (int iz = 0; iz < d[2]; ++iz, ++idx) {
        Eigen::Vector3d g = recip.transpose() *
                            Eigen::Vector3d(fft_miller(ix, d[0]),
                                            fft_miller(iy, d[1]),
                                            fft_miller(iz, d[2]));
        double g2 = g.squaredNorm();
        ng[idx] = g2 > 1e-20 ? ng[idx] * (4.0 * units::pi / g2)
                             : std::complex<double>(0.0, 0.0);
      }
  fft.backward(ng);

  HartreeResult res;
  res.potential.resize(density.size());
  double e = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    res.potential[i] = ng[i].real();
    e += density.values[i] * res.potential[i];
  }
  res.energy = 0.5 * e * density.cell_dv();
  return res;
}

} // namespace pwdesk
