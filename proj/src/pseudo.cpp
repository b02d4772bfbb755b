#include "pwdesk/pseudo.hpp"
#include "pwdesk/error.hpp"
#include "pwdesk/units.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace pwdesk {

namespace {

const std::set<std::string>& known_elements() {
  static const std::set<std::string> e = {
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
      "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
      "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
      "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
      "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "X"};
  return e;
}

const std::set<std::string>& xc_tags() {
  static const std::set<std::string> t = {"pbe", "pz", "vwn", "coulomb",
                                          "blyp", "pw91"};
  return t;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double trapz(const std::vector<double>& r, const std::vector<double>& f) {
  double s = 0.0;
  for (std::size_t i = 1; i < r.size(); ++i)
    s += 0.5 * (f[i] + f[i - 1]) * (r[i] - r[i - 1]);
  return s;
}

double sphbessel(int l, double x) {
  if (x < 1e-5) {
    // series: j_l(x) ~ x^l / (2l+1)!!
    switch (l) {
      case 0: return 1.0 - x * x / 6.0;
      case 1: return x / 3.0 - x * x * x / 30.0;
      default: throw InputError("projector channels limited to l <= 1");
    }
  }
  switch (l) {
    case 0: return std::sin(x) / x;
    case 1: return std::sin(x) / (x * x) - std::cos(x) / x;
    default: throw InputError("projector channels limited to l <= 1");
  }
}

} // namespace

PseudoMeta parse_upf_name(const std::string& filename) {
  std::string base = filename;
  auto slash = base.find_last_of("/\\");
  if (slash != std::string::npos) base = base.substr(slash + 1);

  auto lower = base;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower.size() < 4 || lower.substr(lower.size() - 4) != ".upf")
    throw InputError("pseudopotential filename must end in .UPF: " + filename);
  std::string stem = base.substr(0, base.size() - 4);

  auto dot = stem.find('.');
  PseudoMeta meta;
  meta.element = (dot == std::string::npos) ? stem : stem.substr(0, dot);
  if (meta.element.empty())
    throw InputError("empty element field in " + filename);
  if (!known_elements().count(meta.element)) {
    meta.element_known = false;
    std::cerr << "warning: unrecognized element symbol '" << meta.element
              << "' in " << filename << "\n";
  }
  if (dot == std::string::npos)
    throw InputError("missing mandatory exchange-correlation field in " +
                     filename);

  std::vector<std::string> fields = split(stem.substr(dot + 1), '-');
  std::size_t i = 0;
  if (i < fields.size() && fields[i] == "rel") {
    meta.relativistic = true;
    ++i;
  }
  if (i >= fields.size() || !xc_tags().count(fields[i]))
    throw InputError("missing mandatory exchange-correlation field in " +
                     filename);
  meta.xc_tag = fields[i++];
  for (; i < fields.size(); ++i) {
    const std::string& tok = fields[i];
    if (tok.size() == 1 && std::string("spdfn").find(tok[0]) != std::string::npos)
      meta.state_tags.insert(tok[0]);
    else
      meta.origin_tags.push_back(tok); // compound tokens (mt_fhi) kept opaque
  }
  return meta;
}

void Pseudopotential::validate() const {
  if (r_grid.empty()) throw ParseError("empty radial grid");
  if (r_grid.front() <= 0.0)
    throw ParseError("radial grid must start above r = 0");
  for (std::size_t i = 1; i < r_grid.size(); ++i)
    if (r_grid[i] <= r_grid[i - 1])
      throw ParseError("radial grid not strictly increasing near index " +
                       std::to_string(i));
  if (v_local.size() != r_grid.size())
    throw ParseError("v_local length does not match the radial grid");

  std::set<int> seen_l;
  for (const auto& ch : projectors) {
    if (ch.beta.size() != r_grid.size())
      throw ParseError("projector table length does not match the radial grid");
    if (!seen_l.insert(ch.l).second)
      throw ParseError("multiple projectors for l=" + std::to_string(ch.l) +
                       "; only one per channel is supported");
    for (std::size_t i = 0; i < r_grid.size(); ++i)
      if (r_grid[i] > r_c && std::abs(ch.beta[i]) > 1e-10)
        throw ParseError("projector does not vanish beyond r_c");
  }

  // Coulomb tail: v -> -z/r beyond r_c (checked with a small margin so the
  // transition point itself is not penalized)
  double r_check = std::max(r_c * 1.5, r_c + 1.0);
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (r_grid[i] < r_check) continue;
    double coul = -z_valence / r_grid[i];
    if (std::abs(v_local[i] - coul) > 1e-6 * std::abs(coul) + 1e-14)
      throw ParseError("local potential violates the -Z/r Coulomb tail at r=" +
                       std::to_string(r_grid[i]));
  }
}

Pseudopotential parse_pseudo(std::istream& is, const std::string& name) {
  Pseudopotential ps;
  std::string line;
  int lineno = 0;
  int npoints = -1, nchannels = -1;
  std::vector<std::vector<double>> rows;

  auto next_tokens = [&](std::vector<std::string>& toks) -> bool {
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      std::istringstream ls(line);
      toks.clear();
      std::string t;
      while (ls >> t) toks.push_back(t);
      if (!toks.empty()) return true;
    }
    return false;
  };

  std::vector<std::string> toks;
  bool in_table = false;
  while (next_tokens(toks)) {
    if (!in_table) {
      const std::string& key = toks[0];
      try {
        if (key == "element" && toks.size() == 2) {
          ps.element = toks[1];
        } else if (key == "z_valence" && toks.size() == 2) {
          ps.z_valence = std::stod(toks[1]);
        } else if (key == "r_c" && toks.size() == 2) {
          ps.r_c = std::stod(toks[1]);
        } else if (key == "channels" && toks.size() == 2) {
          nchannels = std::stoi(toks[1]);
          ps.projectors.resize(nchannels);
        } else if (key == "channel" && toks.size() == 6) {
          int idx = std::stoi(toks[1]);
          if (nchannels < 0 || idx < 0 || idx >= nchannels)
            throw ParseError("channel index out of range in " + name, lineno);
          ps.projectors[idx].l = std::stoi(toks[3]);
          ps.projectors[idx].coupling = std::stod(toks[5]);
        } else if (key == "reference_norms") {
          for (std::size_t i = 1; i < toks.size(); ++i)
            ps.reference_norms.push_back(std::stod(toks[i]));
        } else if (key == "points" && toks.size() == 2) {
          npoints = std::stoi(toks[1]);
          in_table = true;
        } else {
          throw ParseError("malformed header line '" + line + "' in " + name,
                           lineno);
        }
      } catch (const std::invalid_argument&) {
        throw ParseError("malformed number in '" + line + "' in " + name,
                         lineno);
      }
    } else {
      if (nchannels < 0) nchannels = 0;
      if (int(toks.size()) != 2 + nchannels)
        throw ParseError("expected " + std::to_string(2 + nchannels) +
                             " columns in " + name,
                         lineno);
      std::vector<double> row;
      for (const auto& t : toks) {
        try {
          row.push_back(std::stod(t));
        } catch (const std::invalid_argument&) {
          throw ParseError("malformed number '" + t + "' in " + name, lineno);
        }
      }
      rows.push_back(row);
    }
  }

  if (ps.element.empty())
    throw ParseError("missing 'element' header in " + name);
  if (npoints < 1) throw ParseError("missing 'points' header in " + name);
  if (int(rows.size()) != npoints)
    throw ParseError("expected " + std::to_string(npoints) +
                     " table rows, got " + std::to_string(rows.size()) +
                     " in " + name);

  for (const auto& row : rows) {
    ps.r_grid.push_back(row[0]);
    ps.v_local.push_back(row[1]);
    for (std::size_t c = 0; c < ps.projectors.size(); ++c)
      ps.projectors[c].beta.push_back(row[2 + c]);
  }
  if (!ps.reference_norms.empty() &&
      ps.reference_norms.size() != ps.projectors.size())
    throw ParseError("reference_norms count does not match channels in " + name);
  ps.validate();
  return ps;
}

Pseudopotential load_pseudo(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open pseudopotential file " + path);
  return parse_pseudo(is, path);
}

void save_pseudo(std::ostream& os, const Pseudopotential& ps) {
  os.precision(17);
  os << "# pwdesk radial pseudopotential table (atomic units)\n";
  os << "element " << ps.element << "\n";
  os << "z_valence " << ps.z_valence << "\n";
  os << "r_c " << ps.r_c << "\n";
  os << "channels " << ps.projectors.size() << "\n";
  for (std::size_t c = 0; c < ps.projectors.size(); ++c)
    os << "channel " << c << " l " << ps.projectors[c].l << " coupling "
       << ps.projectors[c].coupling << "\n";
  if (!ps.reference_norms.empty()) {
    os << "reference_norms";
    for (double n : ps.reference_norms) os << " " << n;
    os << "\n";
  }
  os << "points " << ps.r_grid.size() << "\n";
  for (std::size_t i = 0; i < ps.r_grid.size(); ++i) {
    os << ps.r_grid[i] << " " << ps.v_local[i];
    for (const auto& ch : ps.projectors) os << " " << ch.beta[i];
    os << "\n";
  }
}

Pseudopotential make_coulomb_model(const std::string& element, double z,
                                   int npoints, double rmax) {
  Pseudopotential ps;
  ps.element = element;
  ps.z_valence = z;
  ps.r_c = 0.0;
  double rmin = 1e-5;
  double dx = std::log(rmax / rmin) / (npoints - 1);
  for (int i = 0; i < npoints; ++i) {
    double r = rmin * std::exp(i * dx);
    ps.r_grid.push_back(r);
    ps.v_local.push_back(-z / r);
  }
  ps.validate();
  return ps;
}

Pseudopotential make_screened_model(const std::string& element, double z,
                                    double sigma, int npoints, double rmax) {
  Pseudopotential ps;
  ps.element = element;
  ps.z_valence = z;
  ps.r_c = 6.0 * sigma; // erfc(6) ~ 2e-17: pure Coulomb beyond
  double rmin = 1e-5;
  double dx = std::log(rmax / rmin) / (npoints - 1);
  for (int i = 0; i < npoints; ++i) {
    double r = rmin * std::exp(i * dx);
    ps.r_grid.push_back(r);
    ps.v_local.push_back(-z * std::erf(r / sigma) / r);
  }
  ps.validate();
  return ps;
}

NormCheckResult check_norm_conservation(
    const Pseudopotential& ps,
    const std::vector<std::vector<double>>& pseudo_wf, double tolerance) {
  if (pseudo_wf.size() != ps.projectors.size())
    throw InputError("wavefunction table count does not match channels");
  NormCheckResult res;
  for (std::size_t c = 0; c < pseudo_wf.size(); ++c) {
    if (pseudo_wf[c].size() != ps.r_grid.size())
      throw InputError("wavefunction table length does not match the grid");
    if (c >= ps.reference_norms.size()) {
      res.deviation.push_back(std::nan(""));
      res.checked.push_back(false);
      continue;
    }
    // 4 pi Int_0^rc |psi|^2 r^2 dr, trapezoid restricted to the grid points
    // inside r_c
    std::vector<double> r, f;
    for (std::size_t i = 0; i < ps.r_grid.size(); ++i) {
      if (ps.r_grid[i] > ps.r_c) break;
      r.push_back(ps.r_grid[i]);
      f.push_back(pseudo_wf[c][i] * pseudo_wf[c][i] * ps.r_grid[i] *
                  ps.r_grid[i]);
    }
    double q = 4.0 * units::pi * (r.size() > 1 ? trapz(r, f) : 0.0);
    double dev = std::abs(q - ps.reference_norms[c]);
    res.deviation.push_back(dev);
    res.checked.push_back(true);
    if (dev >= tolerance) res.pass = false;
  }
  return res;
}

double log_derivative(const std::vector<double>& radial_wf,
                      const std::vector<double>& r_grid, std::size_t i) {
  if (i == 0 || i + 1 >= r_grid.size())
    throw InputError("log derivative requires an interior grid point");
  if (std::abs(radial_wf[i]) < 1e-12)
    throw InputError("wavefunction node at the requested radius");
  // centered difference on a nonuniform mesh
  double hm = r_grid[i] - r_grid[i - 1];
  double hp = r_grid[i + 1] - r_grid[i];
  double dpsi = (hm * hm * radial_wf[i + 1] - hp * hp * radial_wf[i - 1] +
                 (hp * hp - hm * hm) * radial_wf[i]) /
                (hm * hp * (hm + hp));
  return dpsi / radial_wf[i];
}

double vloc_reciprocal(const Pseudopotential& ps, double omega_bohr,
                       double gnorm) {
  const auto& r = ps.r_grid;
  std::vector<double> f(r.size());
  if (gnorm < 1e-12) {
    for (std::size_t i = 0; i < r.size(); ++i)
      f[i] = (ps.v_local[i] + ps.z_valence / r[i]) * r[i] * r[i];
    return 4.0 * units::pi / omega_bohr * trapz(r, f);
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    double x = gnorm * r[i];
    f[i] = (ps.v_local[i] + ps.z_valence / r[i]) * std::sin(x) / x * r[i] * r[i];
  }
  double fmax = 0.0;
  for (double v : f) fmax = std::max(fmax, std::abs(v));
  if (fmax > 0.0 && std::abs(f.back()) > 1e-8 * fmax)
    std::cerr << "warning: local-potential integrand not decayed at the end "
                 "of the radial grid (element "
              << ps.element << ")\n";
  double shortrange = 4.0 * units::pi / omega_bohr * trapz(r, f);
  return shortrange -
         4.0 * units::pi * ps.z_valence / (omega_bohr * gnorm * gnorm);
}

ProjectorSet expand_projectors(const Pseudopotential& ps,
                               const PlaneWaveBasis& basis, double omega_bohr,
                               const Eigen::Vector3d& tau_bohr) {
  ProjectorSet set;
  const double y00 = 1.0 / std::sqrt(4.0 * units::pi);
  const double y1 = std::sqrt(3.0 / (4.0 * units::pi));
  for (const auto& ch : ps.projectors) {
    // radial transform at each |k+G|
    std::vector<double> radial(basis.size());
    std::vector<double> f(ps.r_grid.size());
    for (std::size_t i = 0; i < basis.size(); ++i) {
      double q = basis.kplusg_cart(i).norm();
      for (std::size_t j = 0; j < ps.r_grid.size(); ++j)
        f[j] = ch.beta[j] * sphbessel(ch.l, q * ps.r_grid[j]) * ps.r_grid[j] *
               ps.r_grid[j];
      radial[i] = 4.0 * units::pi / std::sqrt(omega_bohr) * trapz(ps.r_grid, f);
    }
    int nm = (ch.l == 0) ? 1 : 3;
    for (int m = 0; m < nm; ++m) {
      std::vector<std::complex<double>> b(basis.size());
      for (std::size_t i = 0; i < basis.size(); ++i) {
        Eigen::Vector3d q = basis.kplusg_cart(i);
        double qn = q.norm();
        double ang;
        if (ch.l == 0) {
          ang = y00;
        } else if (qn < 1e-12) {
          ang = 0.0; // j_1(0) = 0 anyway
        } else {
          ang = y1 * q[m] / qn;
        }
        std::complex<double> il = (ch.l == 0)
                                      ? std::complex<double>(1.0, 0.0)
                                      : std::complex<double>(0.0, -1.0);
        b[i] = radial[i] * ang * il *
               std::exp(std::complex<double>(0.0, -q.dot(tau_bohr)));
      }
      set.beta.push_back(std::move(b));
      set.coupling.push_back(ch.coupling);
    }
  }
  return set;
}

std::vector<std::complex<double>> kb_apply(
    const ProjectorSet& set, const std::vector<std::complex<double>>& psi) {
  std::vector<std::complex<double>> out(psi.size(), 0.0);
  for (std::size_t t = 0; t < set.beta.size(); ++t) {
    const auto& b = set.beta[t];
    if (b.size() != psi.size())
      throw InputError("projector/basis size mismatch in kb_apply");
    std::complex<double> ov = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) ov += std::conj(b[i]) * psi[i];
    std::complex<double> w = set.coupling[t] * ov;
    for (std::size_t i = 0; i < psi.size(); ++i) out[i] += w * b[i];
  }
  return out;
}

} // namespace pwdesk
