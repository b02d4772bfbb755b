#include "pwdesk/postproc.hpp"

#include "pwdesk/error.hpp"
#include "pwdesk/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace pwdesk {

namespace {

int fft_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

// spectral embedding of a real grid field into larger FFT dims
std::vector<double> embed_field(const std::vector<double>& v,
                                std::array<int, 3> from, std::array<int, 3> to) {
  if (from == to) return v;
  Fft3d small(from), big(to);
  std::vector<std::complex<double>> spec(v.begin(), v.end());
  small.forward(spec);
  std::vector<std::complex<double>> out(big.size(), 0.0);
  auto wrap = [](int f, int n) { return f < 0 ? f + n : f; };
  std::size_t idx = 0;
  for (int ix = 0; ix < from[0]; ++ix)
    for (int iy = 0; iy < from[1]; ++iy)
      for (int iz = 0; iz < from[2]; ++iz, ++idx) {
        int fx = fft_freq(ix, from[0]);
        int fy = fft_freq(iy, from[1]);
        int fz = fft_freq(iz, from[2]);
        std::size_t j = (std::size_t(wrap(fx, to[0])) * to[1] +
                         wrap(fy, to[1])) * to[2] + wrap(fz, to[2]);
        out[j] = spec[idx];
      }
  big.backward(out);
  std::vector<double> res(out.size());
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = out[i].real();
  return res;
}

std::string label_at(const KPath& path, std::size_t idx) {
  for (std::size_t j = 0; j < path.node_indices.size(); ++j)
    if (path.node_indices[j] == idx) return path.node_labels[j];
  for (std::size_t s = 0; s + 1 < path.node_indices.size(); ++s)
    if (path.node_indices[s] < idx && idx < path.node_indices[s + 1])
      return "(" + path.node_labels[s] + "-" + path.node_labels[s + 1] + ")";
  throw InternalError("path index outside all segments");
}

bool is_node_label(const std::string& s) { return s.empty() || s[0] != '('; }

} // namespace

std::string BandStructure::serialize() const {
  std::ostringstream os;
  char buf[64];
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.8f", path.cumulative_distance[i]);
    os << buf;
    for (double e : energies[i]) {
      std::snprintf(buf, sizeof buf, "\t%.8f", e);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

std::string BandStructure::labels_sidecar() const {
  std::ostringstream os;
  char buf[64];
  for (std::size_t j = 0; j < path.node_indices.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.8f",
                  path.cumulative_distance[path.node_indices[j]]);
    os << buf << "\t" << path.node_labels[j] << "\n";
  }
  return os.str();
}

BandStructure band_structure(const ScfSystem& sys, const ScfResult& scf,
                             const ScfOptions& opt, const KPath& path,
                             bool force) {
  if (!scf.converged && !force)
    throw InputError("band_structure: SCF result is not converged");
  const Cell& cell = sys.cell;

  double nelec = sys.extra_electrons;
  for (std::size_t i = 0; i < cell.natoms(); ++i)
    nelec += sys.pseudos.at(cell.species[i]).z_valence;

  int nb = opt.n_bands;
  if (nb <= 0)
    nb = int(std::ceil(nelec / 2.0)) +
         std::max(4, int(std::ceil(nelec / 20.0)));

  std::vector<PlaneWaveBasis> bases;
  std::array<int, 3> dims = scf.final_density.dims;
  for (const auto& k : path.points) {
    bases.push_back(build_basis(cell, k, opt.ecut_wfc));
    for (int d = 0; d < 3; ++d)
      dims[d] = std::max(dims[d], bases.back().fft_dims[d]);
  }
  for (int d = 0; d < 3; ++d) dims[d] = fft_friendly_size(dims[d]);

  const double ab = units::angstrom_in_bohr;
  const double omega = cell.volume() * ab * ab * ab;

  std::vector<double> v_eff;
  {
    std::vector<double> v_loc;
    if (cell.natoms() > 0)
      v_loc = local_potential(cell, sys.pseudos, scf.final_density.dims);
    else
      v_loc.assign(scf.final_density.size(), 0.0);
    if (opt.use_xc) {
      EffectivePotential pot =
          build_effective_potential(sys, scf.final_density, opt.xc, v_loc);
      v_eff = std::move(pot.v_eff);
    } else {
      HartreeResult h = hartree(scf.final_density, cell);
      v_eff = std::move(h.potential);
      for (std::size_t i = 0; i < v_eff.size(); ++i) v_eff[i] += v_loc[i];
    }
    v_eff = embed_field(v_eff, scf.final_density.dims, dims);
  }
  Fft3d fft(dims);

  BandStructure bs;
  bs.path = path;
  bs.n_electrons = nelec;
  bs.energies.resize(path.points.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t ip = 0; ip < path.points.size(); ++ip) {
    std::vector<ProjectorSet> nonlocal;
    for (std::size_t a = 0; a < cell.natoms(); ++a) {
      const Pseudopotential& ps = sys.pseudos.at(cell.species[a]);
      if (ps.projectors.empty()) continue;
      nonlocal.push_back(
          expand_projectors(ps, bases[ip], omega, cell.positions[a] * ab));
    }
    int nb_k = std::min<std::size_t>(nb, bases[ip].size());
    DiagResult d = diagonalize(bases[ip], v_eff, nonlocal, nb_k, fft,
                               opt.dense_threshold);
    std::vector<double>& row = bs.energies[ip];
    row.resize(nb_k);
    for (int n = 0; n < nb_k; ++n)
      row[n] =
          (d.eigenvalues[n] - scf.solution.fermi_level) * units::hartree_in_ev;
  }

  // keep the band count constant across the path
  std::size_t nmin = bs.energies.empty() ? 0 : bs.energies[0].size();
  for (const auto& row : bs.energies) nmin = std::min(nmin, row.size());
  for (auto& row : bs.energies) row.resize(nmin);
  return bs;
}

GapReport analyze_gap(const BandStructure& bands) {
  double ne = bands.n_electrons;
  if (std::abs(ne - 2.0 * std::round(ne / 2.0)) > 1e-9)
    throw InputError("analyze_gap: odd electron count is unsupported");
  std::size_t n_occ = std::size_t(std::llround(ne / 2.0));
  if (n_occ == 0) throw InputError("analyze_gap: no occupied bands");
  for (const auto& row : bands.energies)
    if (row.size() < n_occ + 1)
      throw InputError("analyze_gap: need at least n_occ+1 bands");

  GapReport rep;
  double vbm = -1e300, cbm = 1e300;
  for (std::size_t i = 0; i < bands.energies.size(); ++i) {
    double v = bands.energies[i][n_occ - 1];
    double c = bands.energies[i][n_occ];
    if (v > vbm) { // strict: ties keep the earlier index
      vbm = v;
      rep.vbm_index = i;
    }
    if (c < cbm) {
      cbm = c;
      rep.cbm_index = i;
    }
  }
  rep.vbm_ev = vbm;
  rep.cbm_ev = cbm;
  rep.metallic = vbm >= cbm;
  rep.gap_mev = std::max(0.0, cbm - vbm) * 1000.0;
  rep.direct = rep.vbm_index == rep.cbm_index;
  rep.vbm_label = label_at(bands.path, rep.vbm_index);
  rep.cbm_label = label_at(bands.path, rep.cbm_index);

  if (rep.direct) {
    rep.position = rep.vbm_label;
  } else if (rep.vbm_label == rep.cbm_label) {
    rep.position = rep.vbm_label;
  } else if (is_node_label(rep.vbm_label) && is_node_label(rep.cbm_label)) {
    rep.position = rep.vbm_label + "-" + rep.cbm_label;
  } else if (is_node_label(rep.vbm_label)) {
    rep.position = rep.vbm_label + "+" + rep.cbm_label;
  } else if (is_node_label(rep.cbm_label)) {
    rep.position = rep.cbm_label + "+" + rep.vbm_label;
  } else {
    rep.position = rep.vbm_label + "+" + rep.cbm_label;
  }
  return rep;
}

std::string Curve::serialize() const {
  std::ostringstream os;
  char buf[80];
  for (std::size_t i = 0; i < energy.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f\t%.8e\n", energy[i], value[i]);
    os << buf;
  }
  return os.str();
}

Curve dos(const std::vector<std::vector<double>>& eigenvalues,
          const std::vector<double>& weights, double sigma, double emin,
          double emax, std::size_t npoints) {
  if (sigma <= 0.0) throw InputError("dos: sigma must be positive");
  if (npoints < 2 || emax <= emin) throw InputError("dos: bad energy grid");
  Curve c;
  c.energy.resize(npoints);
  c.value.assign(npoints, 0.0);
  const double de = (emax - emin) / double(npoints - 1);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * units::pi));
  for (std::size_t i = 0; i < npoints; ++i) c.energy[i] = emin + de * i;
  for (std::size_t k = 0; k < eigenvalues.size(); ++k)
    for (double e : eigenvalues[k])
      for (std::size_t i = 0; i < npoints; ++i) {
        double x = (c.energy[i] - e) / sigma;
        c.value[i] += 2.0 * weights[k] * norm * std::exp(-0.5 * x * x);
      }
  return c;
}

OrbitalProjectors atomic_orbital_projectors(const Cell& cell,
                                            const PlaneWaveBasis& basis,
                                            double width_bohr, int lmax) {
  if (lmax < 0 || lmax > 1)
    throw InputError("atomic_orbital_projectors: only s and p supported");
  const double ab = units::angstrom_in_bohr;
  const double omega = cell.volume() * ab * ab * ab;

  // radial Gaussians tabulated on a shared mesh, dressed as projector
  // channels so the Bessel-transform machinery can be reused
  Pseudopotential carrier;
  int npts = 600;
  double rmax = 8.0 * width_bohr;
  for (int i = 1; i <= npts; ++i)
    carrier.r_grid.push_back(rmax * double(i) / npts);

  OrbitalProjectors out;
  for (std::size_t a = 0; a < cell.natoms(); ++a) {
    for (int l = 0; l <= lmax; ++l) {
      ProjectorChannel ch;
      ch.l = l;
      ch.coupling = 1.0;
      for (double r : carrier.r_grid)
        ch.beta.push_back(std::pow(r, l) *
                          std::exp(-0.5 * r * r / (width_bohr * width_bohr)));
      carrier.projectors = {ch};
      ProjectorSet set = expand_projectors(carrier, basis, omega,
                                           cell.positions[a] * ab);
      OrbitalProjectors::Channel channel;
      channel.atom = a;
      channel.l = l;
      for (auto& b : set.beta) {
        // the raw Bessel-transform expansion is never normalized; rescale
        // on the basis so |<beta|psi>|^2 is a proper projection weight
        double norm2 = 0.0;
        for (const auto& x : b) norm2 += std::norm(x);
        if (norm2 <= 0.0)
          throw InternalError("vanishing atomic orbital projector");
        double s = 1.0 / std::sqrt(norm2);
        for (auto& x : b) x *= s;
        channel.m_beta.push_back(std::move(b));
      }
      out.channels.push_back(std::move(channel));
    }
  }
  return out;
}

std::vector<double> orbital_weights(
    const OrbitalProjectors& projectors,
    const std::vector<std::complex<double>>& psi) {
  std::vector<double> w;
  w.reserve(projectors.channels.size());
  for (const auto& ch : projectors.channels) {
    double s = 0.0;
    for (const auto& b : ch.m_beta) {
      if (b.size() != psi.size())
        throw InputError("orbital_weights: basis size mismatch");
      std::complex<double> ip = 0.0;
      for (std::size_t i = 0; i < b.size(); ++i)
        ip += std::conj(b[i]) * psi[i];
      s += std::norm(ip);
    }
    w.push_back(s);
  }
  return w;
}

PdosResult pdos(const ScfSystem& sys, const ScfResult& scf,
                const ScfOptions& opt, double sigma_ev, double width_bohr,
                std::size_t npoints) {
  const Cell& cell = sys.cell;
  KMesh kmesh = monkhorst_pack(opt.kgrid[0], opt.kgrid[1], opt.kgrid[2]);
  if (kmesh.points.size() != scf.solution.eigenvalues.size())
    throw InputError("pdos: k-mesh does not match the SCF solution");

  double emin = 1e300, emax = -1e300;
  std::vector<std::vector<double>> eig_ev(kmesh.points.size());
  for (std::size_t ik = 0; ik < kmesh.points.size(); ++ik) {
    for (double e : scf.solution.eigenvalues[ik]) {
      double ev = (e - scf.solution.fermi_level) * units::hartree_in_ev;
      eig_ev[ik].push_back(ev);
      emin = std::min(emin, ev);
      emax = std::max(emax, ev);
    }
  }
  emin -= 5.0 * sigma_ev;
  emax += 5.0 * sigma_ev;

  PdosResult res;
  res.total = dos(eig_ev, kmesh.weights, sigma_ev, emin, emax, npoints);
  res.energy = res.total.energy;

  // one entry per (atom, l); channel layout is identical at every k
  bool entries_ready = false;
  const double norm = 1.0 / (sigma_ev * std::sqrt(2.0 * units::pi));
  for (std::size_t ik = 0; ik < kmesh.points.size(); ++ik) {
    PlaneWaveBasis basis = build_basis(cell, kmesh.points[ik], opt.ecut_wfc);
    OrbitalProjectors proj =
        atomic_orbital_projectors(cell, basis, width_bohr, 1);
    if (!entries_ready) {
      for (const auto& ch : proj.channels) {
        PdosResult::Entry e;
        e.atom = ch.atom;
        e.l = ch.l;
        e.value.assign(npoints, 0.0);
        res.entries.push_back(std::move(e));
      }
      entries_ready = true;
    }
    const auto& c = scf.solution.coefficients[ik];
    for (Eigen::Index n = 0; n < c.cols(); ++n) {
      std::vector<std::complex<double>> psi(basis.size());
      for (std::size_t i = 0; i < basis.size(); ++i) psi[i] = c(i, n);
      std::vector<double> w = orbital_weights(proj, psi);
      for (std::size_t t = 0; t < w.size(); ++t)
        for (std::size_t i = 0; i < npoints; ++i) {
          double x = (res.energy[i] - eig_ev[ik][n]) / sigma_ev;
          res.entries[t].value[i] +=
              2.0 * kmesh.weights[ik] * w[t] * norm * std::exp(-0.5 * x * x);
        }
    }
  }
  return res;
}

DensityGrid charge_density_difference(const DensityGrid& bilayer,
                                      const DensityGrid& top,
                                      const DensityGrid& bottom) {
  if (bilayer.dims != top.dims || bilayer.dims != bottom.dims)
    throw InputError("charge_density_difference: grid mismatch");
  DensityGrid d = bilayer;
  for (std::size_t i = 0; i < d.size(); ++i)
    d.values[i] = bilayer.values[i] - top.values[i] - bottom.values[i];
  return d;
}

void write_cdd_cube(std::ostream& os, const Cell& cell, const DensityGrid& cdd,
                    double isovalue) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "recommended isovalue %.4f e/Ang^3",
                isovalue);
  write_cube(os, cell, cdd.values, cdd.dims, buf);
}

} // namespace pwdesk
