#include "pwdesk/pipeline.hpp"

#include "pwdesk/error.hpp"
#include "pwdesk/units.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace pwdesk {

namespace {

constexpr const char* kVersion = "pwdesk 0.1.0";

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// layer tags from the z midline when the cell carries none
Cell ensure_layer_tags(Cell cell) {
  bool tagged = !cell.layer_tag.empty();
  for (int t : cell.layer_tag) tagged &= t == 0 || t == 1;
  if (tagged && cell.natoms() > 0) return cell;
  if (cell.natoms() < 2)
    throw InputError("layer scan needs at least two atoms");
  double zmin = 1e300, zmax = -1e300;
  for (const auto& p : cell.positions) {
    zmin = std::min(zmin, p.z());
    zmax = std::max(zmax, p.z());
  }
  double zmid = 0.5 * (zmin + zmax);
  for (std::size_t i = 0; i < cell.natoms(); ++i)
    cell.layer_tag[i] = cell.positions[i].z() > zmid ? 1 : 0;
  return cell;
}

double interlayer_distance(const Cell& cell) {
  double base = 1e300, low_top = 1e300;
  for (std::size_t i = 0; i < cell.natoms(); ++i) {
    if (cell.layer_tag[i] == 0) base = std::min(base, cell.positions[i].z());
    else low_top = std::min(low_top, cell.positions[i].z());
  }
  return low_top - base;
}

Cell set_interlayer_distance(const Cell& tagged, double d) {
  Cell cell = tagged;
  double shift = d - interlayer_distance(cell);
  for (std::size_t i = 0; i < cell.natoms(); ++i)
    if (cell.layer_tag[i] == 1) cell.positions[i].z() += shift;
  return cell;
}

double inplane_area(const Cell& cell) {
  return cell.lattice.row(0).head<3>().cross(
             cell.lattice.row(1).head<3>().eval()).norm();
}

struct RowEnergy {
  double e = 0.0;
  bool converged = false;
};

RowEnergy try_scf(const ScfSystem& sys, const ScfOptions& opt,
                  ScfResult* result = nullptr) {
  RowEnergy r;
  try {
    ScfResult res = scf_loop(sys, opt);
    r.e = res.total_energy;
    r.converged = res.converged;
    if (result) *result = std::move(res);
  } catch (const ConvergenceError&) {
    r.converged = false;
  }
  return r;
}

std::string gap_type(const GapReport& rep) {
  if (rep.metallic) return "Metallic";
  return rep.direct ? "Direct" : "Indirect";
}

} // namespace

ScfSystem bind_scf_system(const BindSystem& bind, const Cell& cell) {
  ScfSystem sys;
  sys.cell = cell;
  sys.pseudos = bind.pseudos;
  sys.d2 = bind.d2;
  sys.extra_electrons = bind.extra_electrons;
  return sys;
}

std::vector<double> default_d_scan() {
  std::vector<double> d;
  for (int i = 0; i <= 10; ++i) d.push_back(2.5 + 0.2 * i);
  return d;
}

std::string BindingCurve::table() const {
  std::string out =
      "d (Å)\tE_total (Ha)\tE_b/atom (meV)\tE_b/area (meV/Å²)"
      "\tstatus\n";
  for (const auto& r : rows) {
    if (r.converged)
      out += fmt("%.2f\t%.12f\t%.4f\t%.6f\tok\n", r.d, r.e_total,
                 r.eb_per_atom, r.eb_per_area);
    else
      out += fmt("%.2f\tn/a\tn/a\tn/a\tunconverged\n", r.d);
  }
  return out;
}

std::string BindingCurve::summary_table(const std::string& label,
                                        const std::string& gap_lda_mev,
                                        const std::string& gap_hse_mev) const {
  std::string out =
      "Configuration\tEb/Ge atom (meV)\tEg (meV) with LDA*\t"
      "Eg (meV) with HSE*\td (Å)\n";
  if (has_minimum)
    out += fmt("%s\t%.4f\t%s\t%s\t%.2f\n", label.c_str(), eb_star,
               gap_lda_mev.c_str(), gap_hse_mev.c_str(), d_star);
  else
    out += fmt("%s\tn/a\t%s\t%s\tn/a\n", label.c_str(), gap_lda_mev.c_str(),
               gap_hse_mev.c_str());
  return out;
}

namespace {

BindingCurve binding_curve_cell(const Cell& tagged_base,
                                const std::map<std::string, Pseudopotential>& pseudos,
                                const D2Params& d2, double extra_electrons,
                                const std::vector<double>& d_list,
                                const ScfOptions& opt) {
  if (d_list.size() < 3)
    throw InputError("binding_curve: need at least three distances");

  BindingCurve curve;
  curve.area = inplane_area(tagged_base);

  std::size_t n_top = 0, n_bot = 0;
  for (int t : tagged_base.layer_tag) (t == 1 ? n_top : n_bot)++;
  curve.n_top_atoms = n_top;

  // isolated-layer references: same lattice, same settings, computed once
  auto [bottom, top] = layer_split(tagged_base);
  double n_all = double(tagged_base.natoms());
  ScfSystem sys_top, sys_bot;
  sys_top.cell = top;
  sys_bot.cell = bottom;
  sys_top.pseudos = sys_bot.pseudos = pseudos;
  sys_top.d2 = sys_bot.d2 = d2;
  sys_top.extra_electrons = extra_electrons * double(n_top) / n_all;
  sys_bot.extra_electrons = extra_electrons * double(n_bot) / n_all;
  RowEnergy ref_top = try_scf(sys_top, opt);
  RowEnergy ref_bot = try_scf(sys_bot, opt);
  if (!ref_top.converged || !ref_bot.converged)
    throw ConvergenceError("binding_curve: reference layer did not converge");
  double e_ref = ref_top.e + ref_bot.e;

  std::vector<double> ds = d_list;
  std::sort(ds.begin(), ds.end());
  for (double d : ds) {
    ScfSystem sys;
    sys.cell = set_interlayer_distance(tagged_base, d);
    sys.pseudos = pseudos;
    sys.d2 = d2;
    sys.extra_electrons = extra_electrons;
    RowEnergy re = try_scf(sys, opt);
    BindingCurve::Row row;
    row.d = d;
    row.converged = re.converged;
    if (re.converged) {
      row.e_total = re.e;
      double delta_mev = (re.e - e_ref) * units::hartree_in_ev * 1000.0;
      row.eb_per_atom = delta_mev / double(n_top);
      row.eb_per_area = delta_mev / curve.area;
    }
    curve.rows.push_back(row);
  }

  // parabola through the three lowest converged rows; the deepest row
  // must be bracketed, otherwise the scan saw no minimum
  std::vector<const BindingCurve::Row*> ok;
  for (const auto& r : curve.rows)
    if (r.converged) ok.push_back(&r);
  std::size_t imin = 0;
  for (std::size_t i = 1; i < ok.size(); ++i)
    if (ok[i]->eb_per_atom < ok[imin]->eb_per_atom) imin = i;
  if (ok.size() >= 3 && imin > 0 && imin + 1 < ok.size()) {
    double x1 = ok[imin - 1]->d, x2 = ok[imin]->d, x3 = ok[imin + 1]->d;
    double y1 = ok[imin - 1]->eb_per_atom, y2 = ok[imin]->eb_per_atom,
           y3 = ok[imin + 1]->eb_per_atom;
    double den = (x1 - x2) * (x1 - x3) * (x2 - x3);
    if (std::abs(den) > 1e-14) {
      double a = (x3 * (y2 - y1) + x2 * (y1 - y3) + x1 * (y3 - y2)) / den;
      double b = (x3 * x3 * (y1 - y2) + x2 * x2 * (y3 - y1) +
                  x1 * x1 * (y2 - y3)) / den;
      if (a > 0.0) {
        curve.has_minimum = true;
        curve.d_star = -b / (2.0 * a);
        double c0 = y1 - a * x1 * x1 - b * x1;
        curve.eb_star = a * curve.d_star * curve.d_star + b * curve.d_star + c0;
      }
    }
  }
  return curve;
}

} // namespace

BindingCurve binding_curve(const BindSystem& bind,
                           const std::vector<double>& d_list,
                           const ScfOptions& opt) {
  if (d_list.empty()) throw InputError("binding_curve: empty distance list");
  double d0 = *std::min_element(d_list.begin(), d_list.end());
  Cell base = build_heterobilayer(bind.top, bind.bottom, bind.pattern, d0,
                                  bind.c);
  return binding_curve_cell(base, bind.pseudos, bind.d2, bind.extra_electrons,
                            d_list, opt);
}

std::string GapTable::table() const {
  std::string out =
      "Interlayer distance, d(Å)\tBand Gap (meV)\t"
      "Position of Band Gap (1 st BZ)\tType of Band Gap\n";
  for (const auto& r : rows) {
    if (r.converged)
      out += fmt("%.1f\t%.1f\t%s\t%s\n", r.d, r.gap_mev, r.position.c_str(),
                 r.type.c_str());
    else
      out += fmt("%.1f\tn/a\tn/a\tUnconverged\n", r.d);
  }
  return out;
}

GapTable gap_vs_distance(const BindSystem& bind,
                         const std::vector<double>& d_list,
                         const ScfOptions& opt, int points_per_segment) {
  if (d_list.empty()) throw InputError("gap_vs_distance: empty distance list");
  double d0 = *std::min_element(d_list.begin(), d_list.end());
  Cell base = build_heterobilayer(bind.top, bind.bottom, bind.pattern, d0,
                                  bind.c);
  std::vector<double> ds = d_list;
  std::sort(ds.begin(), ds.end());

  GapTable tab;
  for (double d : ds) {
    ScfSystem sys = bind_scf_system(bind, set_interlayer_distance(base, d));
    GapTable::Row row;
    row.d = d;
    ScfResult scf;
    RowEnergy re = try_scf(sys, opt, &scf);
    if (re.converged) {
      KPath path = kpath(hexagonal_gkmg(), points_per_segment,
                         reciprocal_lattice(sys.cell));
      GapReport rep = analyze_gap(band_structure(sys, scf, opt, path));
      row.converged = true;
      row.gap_mev = rep.gap_mev;
      row.position = rep.position;
      row.type = gap_type(rep);
    }
    tab.rows.push_back(row);
  }
  return tab;
}

std::string StrainTable::table() const {
  std::string out =
      "Strain (%)\tBand Gap (meV)\tPosition of Band Gap (1 st BZ)\t"
      "E_total (Ha)\n";
  for (const auto& r : rows) {
    if (r.converged)
      out += fmt("%.2f\t%.1f\t%s\t%.12f\n", r.eps * 100.0, r.gap_mev,
                 r.position.c_str(), r.e_total);
    else
      out += fmt("%.2f\tn/a\tn/a\tn/a\n", r.eps * 100.0);
  }
  return out;
}

StrainTable strain_sweep(const ScfSystem& sys,
                         const std::vector<double>& eps_list,
                         const ScfOptions& opt, int points_per_segment) {
  StrainTable tab;
  for (double eps : eps_list) {
    if (eps <= -0.1 || eps >= 0.1)
      throw InputError("strain_sweep: strain outside (-0.1, 0.1)");
    ScfSystem strained = sys;
    strained.cell = apply_biaxial_strain(sys.cell, eps);
    StrainTable::Row row;
    row.eps = eps;
    ScfResult scf;
    RowEnergy re = try_scf(strained, opt, &scf);
    if (re.converged) {
      KPath path = kpath(hexagonal_gkmg(), points_per_segment,
                         reciprocal_lattice(strained.cell));
      GapReport rep = analyze_gap(band_structure(strained, scf, opt, path));
      row.converged = true;
      row.e_total = re.e;
      row.gap_mev = rep.gap_mev;
      row.position = rep.position;
    }
    tab.rows.push_back(row);
  }
  return tab;
}

void save_density(std::ostream& os, const DensityGrid& density) {
  os << "dims " << density.dims[0] << " " << density.dims[1] << " "
     << density.dims[2] << "\n";
  char buf[48];
  for (double v : density.values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    os << buf;
  }
}

DensityGrid load_density(std::istream& is, const Cell& cell) {
  std::string key;
  std::array<int, 3> dims;
  if (!(is >> key >> dims[0] >> dims[1] >> dims[2]) || key != "dims")
    throw ParseError("bad density file header");
  DensityGrid d = make_density_grid(cell, dims);
  for (auto& v : d.values)
    if (!(is >> v)) throw ParseError("truncated density file");
  return d;
}

std::string find_pseudo_file(const std::string& filename,
                             const std::string& pseudo_dir,
                             const std::string& search_path) {
  std::vector<std::string> dirs;
  if (!pseudo_dir.empty()) dirs.push_back(pseudo_dir);
  auto split_into = [&](const char* p) {
    if (!p) return;
    std::stringstream ss(p);
    for (std::string item; std::getline(ss, item, ':');)
      if (!item.empty()) dirs.push_back(item);
  };
  split_into(search_path.c_str());
  split_into(std::getenv("PWDESK_PSEUDO_PATH"));
  for (const auto& d : dirs) {
    fs::path p = fs::path(d) / filename;
    if (fs::exists(p)) return p.string();
  }
  throw DependencyError("pseudopotential file not found: " + filename);
}

ResolvedDeck resolve_deck(const Deck& deck, const std::string& search_path) {
  ResolvedDeck r;
  r.deck = deck;
  r.system.cell = deck.build_cell();
  for (const auto& sp : deck.species) {
    std::string path =
        find_pseudo_file(sp.pseudo, deck.control.pseudo_dir, search_path);
    r.pseudo_paths[sp.symbol] = path;
    r.system.pseudos[sp.symbol] = load_pseudo(path);
  }
  // the cell's valences follow the loaded pseudopotentials
  for (std::size_t i = 0; i < r.system.cell.natoms(); ++i)
    r.system.cell.valence_electrons[i] =
        r.system.pseudos.at(r.system.cell.species[i]).z_valence;

  ScfOptions& o = r.options;
  o.ecut_wfc = deck.system.ecutwfc;
  o.ecut_rho = deck.system.ecutrho;
  o.degauss = deck.system.degauss;
  o.smearing = parse_smearing(deck.system.smearing);
  o.mixing_beta = deck.electrons.mixing_beta;
  o.conv_thr = deck.electrons.conv_thr;
  o.xc = parse_xc_kind(deck.system.input_dft);
  if (deck.kpoints.mode == "automatic")
    o.kgrid = {deck.kpoints.mesh[0], deck.kpoints.mesh[1],
               deck.kpoints.mesh[2]};
  std::string vdw = deck.system.vdw_corr;
  std::transform(vdw.begin(), vdw.end(), vdw.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (vdw.empty()) {
    o.use_d2 = false;
  } else if (vdw == "grimme-d2" || vdw == "dft-d" || vdw == "dft-d2") {
    o.use_d2 = true;
  } else {
    throw InputError("unsupported vdw_corr: " + deck.system.vdw_corr);
  }
  return r;
}

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InputError("cannot write " + p.string());
  os << text;
}

std::string energies_text(const ScfResult& res) {
  const EnergyComponents& c = res.components;
  std::string out = "component\tenergy (Ha)\n";
  out += fmt("kinetic\t%.12f\n", c.kinetic);
  out += fmt("local_pseudo\t%.12f\n", c.local_pseudo);
  out += fmt("hartree\t%.12f\n", c.hartree);
  out += fmt("xc\t%.12f\n", c.xc);
  out += fmt("nonlocal\t%.12f\n", c.nonlocal);
  out += fmt("ewald\t%.12f\n", c.ewald);
  out += fmt("dispersion\t%.12f\n", c.dispersion);
  out += fmt("total\t%.12f\n", res.total_energy);
  out += fmt("fermi_level\t%.12f\n", res.solution.fermi_level);
  out += fmt("smearing_free_energy\t%.12f\n", res.smearing_free_energy);
  return out;
}

KPath deck_band_path(const Deck& deck, const Cell& cell) {
  if (deck.kpoints.mode != "crystal_b")
    throw InputError("band path needs K_POINTS {crystal_b}");
  // exclusive-start convention: each node's count is its outgoing segment
  int pps = deck.kpoints.path_counts.front();
  return kpath(deck.kpoints.path_nodes, pps, reciprocal_lattice(cell));
}

// restarts the stored self-consistent state; converges in a few steps
ScfResult restored_scf(const ResolvedDeck& rd, const fs::path& dir,
                       ScfOptions* opt_out) {
  fs::path density_file = dir / "density.dat";
  fs::path state_file = dir / "state.tsv";
  if (!fs::exists(density_file) || !fs::exists(state_file))
    throw DependencyError("no stored scf results for prefix '" +
                          rd.deck.control.prefix +
                          "' (expected density.dat); run the scf deck first");
  ScfOptions opt = rd.options;
  {
    std::ifstream is(state_file);
    std::string key;
    while (is >> key) {
      if (key == "kgrid") is >> opt.kgrid[0] >> opt.kgrid[1] >> opt.kgrid[2];
      else {
        std::string skip;
        std::getline(is, skip);
      }
    }
  }
  std::ifstream is(density_file);
  DensityGrid density = load_density(is, rd.system.cell);
  ScfResult res = scf_loop(rd.system, opt, &density);
  if (!res.converged)
    throw ConvergenceError("stored density did not reconverge");
  if (opt_out) *opt_out = opt;
  return res;
}

} // namespace

RunResult run_deck(const Deck& deck, const std::string& workdir,
                   const std::string& pseudo_search_path) {
  auto t0 = std::chrono::steady_clock::now();
  ResolvedDeck rd = resolve_deck(deck, pseudo_search_path);
  fs::path dir = fs::path(workdir) / deck.control.prefix;
  fs::create_directories(dir);

  RunResult result;
  result.prefix_dir = dir.string();
  const std::string& kind = deck.control.calculation;

  if (kind == "scf") {
    ScfResult res = scf_loop(rd.system, rd.options);
    if (!res.converged)
      throw ConvergenceError("scf did not converge within max_iter");
    write_text(dir / "scf.log", res.iteration_log);
    write_text(dir / "energies.tsv", energies_text(res));
    {
      std::ofstream os(dir / "density.dat", std::ios::binary);
      save_density(os, res.final_density);
    }
    write_text(dir / "state.tsv",
               fmt("kgrid\t%d\t%d\t%d\n", rd.options.kgrid[0],
                   rd.options.kgrid[1], rd.options.kgrid[2]));
    result.outputs = {"scf.log", "energies.tsv", "density.dat", "state.tsv"};
  } else if (kind == "bands") {
    ScfOptions scf_opt;
    ScfResult scf = restored_scf(rd, dir, &scf_opt);
    KPath path = deck_band_path(deck, rd.system.cell);
    BandStructure bs = band_structure(rd.system, scf, rd.options, path);
    write_text(dir / "bands.tsv", bs.serialize());
    write_text(dir / "bands_labels.tsv", bs.labels_sidecar());
    GapReport rep = analyze_gap(bs);
    std::string gap = "gap (meV)\tposition\ttype\n";
    gap += fmt("%.1f\t%s\t%s\n", rep.gap_mev, rep.position.c_str(),
               gap_type(rep).c_str());
    write_text(dir / "gap.tsv", gap);
    result.outputs = {"bands.tsv", "bands_labels.tsv", "gap.tsv"};
  } else if (kind == "dos") {
    ScfOptions scf_opt;
    ScfResult scf = restored_scf(rd, dir, &scf_opt);
    PdosResult p = pdos(rd.system, scf, scf_opt);
    Curve total = p.total;
    write_text(dir / "dos.tsv", total.serialize());
    std::string ptab = "energy (eV)";
    for (const auto& e : p.entries)
      ptab += fmt("\t%s%zu(l=%d)", rd.system.cell.species[e.atom].c_str(),
                  e.atom, e.l);
    ptab += "\ttotal\n";
    for (std::size_t i = 0; i < p.energy.size(); ++i) {
      ptab += fmt("%.6f", p.energy[i]);
      for (const auto& e : p.entries) ptab += fmt("\t%.8e", e.value[i]);
      ptab += fmt("\t%.8e\n", p.total.value[i]);
    }
    write_text(dir / "pdos.tsv", ptab);
    result.outputs = {"dos.tsv", "pdos.tsv"};
  } else if (kind == "cdd") {
    ScfOptions scf_opt;
    ScfResult scf = restored_scf(rd, dir, &scf_opt);
    Cell tagged = ensure_layer_tags(rd.system.cell);
    auto [bottom, top] = layer_split(tagged);
    ScfSystem sys_b = rd.system, sys_t = rd.system;
    sys_b.cell = bottom;
    sys_t.cell = top;
    ScfResult res_b = scf_loop(sys_b, scf_opt);
    ScfResult res_t = scf_loop(sys_t, scf_opt);
    if (!res_b.converged || !res_t.converged)
      throw ConvergenceError("isolated-layer scf did not converge");
    DensityGrid cdd = charge_density_difference(
        scf.final_density, res_t.final_density, res_b.final_density);
    std::ostringstream cube;
    write_cdd_cube(cube, rd.system.cell, cdd);
    write_text(dir / "cdd.cube", cube.str());
    result.outputs = {"cdd.cube"};
  } else if (kind == "bind-scan") {
    Cell tagged = ensure_layer_tags(rd.system.cell);
    BindingCurve curve = binding_curve_cell(tagged, rd.system.pseudos,
                                            rd.system.d2, 0.0,
                                            default_d_scan(), rd.options);
    write_text(dir / "binding.tsv", curve.table());
    write_text(dir / "bind_summary.tsv",
               curve.summary_table(deck.control.prefix));
    result.outputs = {"binding.tsv", "bind_summary.tsv"};
  } else if (kind == "strain-scan") {
    std::vector<double> eps = {-0.04, -0.02, 0.0, 0.02, 0.04};
    StrainTable tab = strain_sweep(rd.system, eps, rd.options);
    write_text(dir / "strain.tsv", tab.table());
    result.outputs = {"strain.tsv"};
  } else {
    throw InputError("run_deck: unsupported calculation kind: " + kind);
  }

  double seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0).count();
  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["calculation"] = kind;
  manifest["prefix"] = deck.control.prefix;
  manifest["deck_hash"] = fnv1a_hex(deck.serialize());
  manifest["outputs"] = result.outputs;
  manifest["pseudo_paths"] = rd.pseudo_paths;
  const ScfOptions& o = rd.options;
  manifest["options"] = {
      {"ecut_wfc_ry", o.ecut_wfc},
      {"ecut_rho_ry", o.ecut_rho > 0.0 ? o.ecut_rho : 4.0 * o.ecut_wfc},
      {"kgrid", {o.kgrid[0], o.kgrid[1], o.kgrid[2]}},
      {"degauss_ry", o.degauss},
      {"smearing", deck.system.smearing},
      {"mixing_beta", o.mixing_beta},
      {"conv_thr_ry", o.conv_thr},
      {"max_iter", o.max_iter},
      {"n_bands", o.n_bands},
      {"dense_threshold", o.dense_threshold},
      {"xc", o.xc == XcKind::pbe ? "pbe" : "pz"},
      {"use_xc", o.use_xc},
      {"use_d2", o.use_d2},
      {"d2_cutoff_ang", o.d2_cutoff},
      {"parallel", o.parallel},
  };
  manifest["timing_seconds"] = seconds;
  manifest["timestamp"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch()).count();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  result.manifest_file = (dir / "manifest.json").string();
  return result;
}

} // namespace pwdesk
