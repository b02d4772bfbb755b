#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pwdesk/error.hpp"
#include "pwdesk/pipeline.hpp"
#include "pwdesk/units.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace pwdesk;

namespace {

std::string data_dir() {
  const char* d = std::getenv("PWDESK_DATA_DIR");
  REQUIRE(d != nullptr);
  return d;
}

// bilayer of chargeless "ghost" atoms: the electronic part is pure jellium
// and the binding curve reduces exactly to the dispersion lattice sum
BindSystem ghost_bind_system() {
  BindSystem bind;
  bind.top = make_honeycomb_layer(3.0, "Gh", "Gh", 0.3, 0.0, 0.0);
  bind.bottom = bind.top;
  bind.pattern = StackPattern::I;
  bind.c = 30.0;
  bind.pseudos["Gh"] = make_screened_model("Gh", 0.0, 1.0);
  bind.d2.elements.clear();
  bind.d2.elements["Gh"] = {100.0, 3.6};
  bind.extra_electrons = 2.0;
  return bind;
}

ScfOptions ghost_options() {
  ScfOptions opt;
  opt.ecut_wfc = 6.0;
  opt.use_xc = false;
  opt.use_d2 = true;
  return opt;
}

// interacting model bilayer, four screened pseudoatoms
BindSystem model_bind_system() {
  BindSystem bind;
  bind.top = make_honeycomb_layer(3.0, "X", "X", 0.3, 2.0, 2.0);
  bind.bottom = bind.top;
  bind.pattern = StackPattern::I;
  bind.c = 12.0;
  bind.pseudos["X"] = make_screened_model("X", 2.0, 1.0);
  bind.d2.elements.clear();
  bind.d2.elements["X"] = {60.0, 3.0};
  return bind;
}

ScfOptions model_options() {
  ScfOptions opt;
  opt.ecut_wfc = 6.0;
  opt.xc = XcKind::pz;
  opt.use_d2 = true;
  opt.mixing_beta = 0.3;
  return opt;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  return lines;
}

std::string model_deck_text(const std::string& calc, const std::string& kcard) {
  return "&CONTROL\n"
         "calculation = '" + calc + "'\n"
         "prefix = 'xlayer'\n"
         "pseudo_dir = '" + data_dir() + "/pseudo/'\n"
         "/\n"
         "&SYSTEM\n"
         "ibrav = 4\na = 3.2\nc = 8.0\nnat = 2\nntyp = 1\n"
         "ecutwfc = 6.0\necutrho = 24.0\n"
         "occupations = 'smearing'\nsmearing = 'm-p'\ndegauss = 0.0005\n"
         "input_dft = 'pz'\n"
         "/\n"
         "&ELECTRONS\nconv_thr = 1e-8\nmixing_beta = 0.5\n/\n"
         "ATOMIC_SPECIES\nX 10.0 X.pz-model.UPF\n"
         "ATOMIC_POSITIONS (angstrom)\n"
         "X 0.0 0.0 0.0\n"
         "X 0.0 1.847520861 0.3\n" + kcard;
}

std::string scf_kcard() { return "K_POINTS {automatic}\n2 2 1 0 0 0\n"; }
std::string bands_kcard() {
  return "K_POINTS {crystal_b}\n3\n"
         "0.0 0.0 0.0 3 !G\n0.3333333 0.3333333 0.0 3 !K\n0.0 0.5 0.0 3 !M\n";
}

std::map<std::string, std::string> slurp_outputs(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() == "manifest.json") continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    files[e.path().filename().string()] = ss.str();
  }
  return files;
}

} // namespace

TEST_CASE("default scan covers 2.5 to 4.5 in 0.2 steps") {
  std::vector<double> d = default_d_scan();
  REQUIRE(d.size() == 11);
  CHECK(d.front() == 2.5);
  CHECK(d.back() == doctest::Approx(4.5).epsilon(1e-14));
  for (std::size_t i = 1; i < d.size(); ++i)
    CHECK(d[i] - d[i - 1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("ghost bilayer binding curve equals the dispersion sum") {
  BindSystem bind = ghost_bind_system();
  ScfOptions opt = ghost_options();
  std::vector<double> d_list;
  for (double d = 2.2; d < 8.01; d += 0.2) d_list.push_back(d);
  BindingCurve curve = binding_curve(bind, d_list, opt);
  REQUIRE(curve.rows.size() == d_list.size());
  CHECK(curve.n_top_atoms == 2);

  // oracle: the dispersion lattice sum evaluated directly per distance
  Cell base = build_heterobilayer(bind.top, bind.bottom, bind.pattern,
                                  d_list.front(), bind.c);
  auto [bot_cell, top_cell] = layer_split(base);
  double e_ref = grimme_d2(top_cell, bind.d2, opt.d2_cutoff) +
                 grimme_d2(bot_cell, bind.d2, opt.d2_cutoff);
  double prev_d = 0.0;
  for (const auto& row : curve.rows) {
    REQUIRE(row.converged);
    CHECK(row.d > prev_d); // sorted
    prev_d = row.d;
    Cell cell = base;
    double shift = row.d - d_list.front();
    for (std::size_t i = 0; i < cell.natoms(); ++i)
      if (cell.layer_tag[i] == 1) cell.positions[i].z() += shift;
    double eb = grimme_d2(cell, bind.d2, opt.d2_cutoff) - e_ref;
    CHECK(std::abs(row.e_total - (e_ref + eb)) < 1e-10);
    CHECK(row.eb_per_atom ==
          doctest::Approx(eb * units::hartree_in_ev * 1000.0 / 2.0)
              .epsilon(1e-8));
    // formula consistency between the two binding columns
    CHECK(row.eb_per_atom * double(curve.n_top_atoms) ==
          doctest::Approx(row.eb_per_area * curve.area).epsilon(1e-12));
  }

  // minimum against a dense scan of the oracle
  REQUIRE(curve.has_minimum);
  double best_d = 0.0, best_e = 1e300;
  for (double d = d_list.front(); d <= d_list.back(); d += 0.01) {
    Cell cell = base;
    for (std::size_t i = 0; i < cell.natoms(); ++i)
      if (cell.layer_tag[i] == 1)
        cell.positions[i].z() += d - d_list.front();
    double e = grimme_d2(cell, bind.d2, opt.d2_cutoff);
    if (e < best_e) {
      best_e = e;
      best_d = d;
    }
  }
  CHECK(std::abs(curve.d_star - best_d) <= 0.2); // within the grid spacing
  CHECK(curve.eb_star < 0.0);

  // vdW decay: the farthest row is a small fraction of the well depth
  CHECK(std::abs(curve.rows.back().eb_per_atom) <
        0.05 * std::abs(curve.eb_star));
}

TEST_CASE("binding curve table and summary schemas") {
  BindSystem bind = ghost_bind_system();
  BindingCurve curve =
      binding_curve(bind, {3.0, 3.4, 3.8, 4.2}, ghost_options());
  auto lines = split_lines(curve.table());
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] ==
        "d (Å)\tE_total (Ha)\tE_b/atom (meV)\tE_b/area (meV/Å²)\tstatus");
  CHECK(lines[1].substr(0, 4) == "3.00");

  auto sum = split_lines(curve.summary_table("Structure-I"));
  REQUIRE(sum.size() == 2);
  CHECK(sum[0] ==
        "Configuration\tEb/Ge atom (meV)\tEg (meV) with LDA*\t"
        "Eg (meV) with HSE*\td (Å)");
  CHECK(sum[1].substr(0, 12) == "Structure-I\t");
}

TEST_CASE("free-electron gap table is metallic at every distance") {
  BindSystem bind = ghost_bind_system();
  GapTable tab = gap_vs_distance(bind, {3.0, 3.5, 4.0}, ghost_options(), 6);
  auto lines = split_lines(tab.table());
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "Interlayer distance, d(Å)\tBand Gap (meV)\t"
        "Position of Band Gap (1 st BZ)\tType of Band Gap");
  for (const auto& r : tab.rows) {
    REQUIRE(r.converged);
    CHECK(r.gap_mev == 0.0);
    CHECK(r.type == "Metallic");
  }
}

TEST_CASE("gap table rows are independent of the rest of the scan") {
  BindSystem bind = model_bind_system();
  ScfOptions opt = model_options();
  GapTable full = gap_vs_distance(bind, {3.0, 3.4, 3.8}, opt, 3);
  GapTable alone = gap_vs_distance(bind, {3.4}, opt, 3);
  REQUIRE(full.rows.size() == 3);
  REQUIRE(alone.rows.size() == 1);
  REQUIRE(full.rows[1].converged);
  CHECK(full.rows[1].gap_mev == alone.rows[0].gap_mev);
  CHECK(full.rows[1].position == alone.rows[0].position);
  CHECK(full.rows[1].type == alone.rows[0].type);
}

TEST_CASE("strain sweep identity and permutation independence") {
  BindSystem bind = model_bind_system();
  Cell cell = build_heterobilayer(bind.top, bind.bottom, bind.pattern, 3.2,
                                  bind.c);
  ScfSystem sys = bind_scf_system(bind, cell);
  ScfOptions opt = model_options();

  StrainTable tab = strain_sweep(sys, {0.02, 0.0, -0.02}, opt, 3);
  REQUIRE(tab.rows.size() == 3);
  CHECK(tab.rows[0].eps == 0.02);
  CHECK(tab.rows[1].eps == 0.0);

  // the eps = 0 row is the unstrained run, bit for bit
  ScfResult direct = scf_loop(sys, opt);
  REQUIRE(tab.rows[1].converged);
  CHECK(tab.rows[1].e_total == direct.total_energy);

  StrainTable rev = strain_sweep(sys, {-0.02, 0.0, 0.02}, opt, 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(tab.rows[i].e_total == rev.rows[2 - i].e_total);
    CHECK(tab.rows[i].gap_mev == rev.rows[2 - i].gap_mev);
  }

  CHECK_THROWS_AS(strain_sweep(sys, {0.2}, opt, 3), InputError);
}

TEST_CASE("density files round-trip exactly") {
  Cell cell = build_hexagonal_cell(3.0, 10.0);
  DensityGrid d = make_density_grid(cell, {3, 4, 5});
  for (std::size_t i = 0; i < d.size(); ++i)
    d.values[i] = std::sin(0.1 * double(i)) / 3.0 + 1e-17;
  std::stringstream ss;
  save_density(ss, d);
  DensityGrid back = load_density(ss, cell);
  REQUIRE(back.dims == d.dims);
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(back.values[i] == d.values[i]);
}

TEST_CASE("bundled dispersion parameter file matches the built-in defaults") {
  D2Params file = load_d2_params(data_dir() + "/d2_params.dat");
  D2Params def = default_d2_params();
  CHECK(file.s6 == def.s6);
  CHECK(file.d_damp == def.d_damp);
  REQUIRE(file.elements.size() == def.elements.size());
  for (const auto& [el, p] : def.elements) {
    REQUIRE(file.elements.count(el) == 1);
    CHECK(file.elements.at(el).c6 == doctest::Approx(p.c6).epsilon(1e-9));
    CHECK(file.elements.at(el).r0 == doctest::Approx(p.r0).epsilon(1e-9));
  }
}

TEST_CASE("pseudo file resolution") {
  std::string p = find_pseudo_file("X.pz-model.UPF", data_dir() + "/pseudo");
  CHECK(fs::exists(p));
  CHECK_THROWS_AS(find_pseudo_file("Nope.UPF", data_dir() + "/pseudo"),
                  DependencyError);
}

TEST_CASE("deck execution: scf then bands, dependencies and determinism") {
  fs::path workdir = fs::temp_directory_path() / "pwdesk_pipeline_test";
  fs::remove_all(workdir);
  fs::create_directories(workdir);

  std::istringstream scf_in(model_deck_text("scf", scf_kcard()));
  Deck scf_deck = parse_deck(scf_in);
  std::istringstream bands_in(model_deck_text("bands", bands_kcard()));
  Deck bands_deck = parse_deck(bands_in);

  // bands before scf: the stored density is missing
  CHECK_THROWS_AS(run_deck(bands_deck, workdir.string()), DependencyError);

  RunResult scf_run = run_deck(scf_deck, workdir.string());
  fs::path dir = scf_run.prefix_dir;
  CHECK(dir.filename() == "xlayer");
  for (const char* f : {"scf.log", "energies.tsv", "density.dat",
                        "state.tsv", "manifest.json"})
    CHECK(fs::exists(dir / f));

  // the iteration log honors the convergence threshold in its last row
  {
    std::ifstream is(dir / "scf.log");
    std::string line, last;
    while (std::getline(is, line))
      if (!line.empty() && line[0] != '#') last = line;
    std::istringstream ls(last);
    int it;
    double e, de, clamp;
    REQUIRE((ls >> it >> e >> de >> clamp));
    CHECK(de < 1e-8 * 0.5); // conv_thr in Ry, log in Ha
  }

  // manifest lists every resolved default
  {
    std::ifstream is(dir / "manifest.json");
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string m = ss.str();
    for (const char* key :
         {"ecut_wfc_ry", "ecut_rho_ry", "kgrid", "degauss_ry", "smearing",
          "mixing_beta", "conv_thr_ry", "max_iter", "n_bands",
          "dense_threshold", "xc", "use_xc", "use_d2", "d2_cutoff_ang",
          "parallel", "deck_hash", "timing_seconds", "pseudo_paths"})
      CHECK(m.find(key) != std::string::npos);
  }

  RunResult bands_run = run_deck(bands_deck, workdir.string());
  CHECK(fs::exists(dir / "bands.tsv"));
  CHECK(fs::exists(dir / "gap.tsv"));
  auto band_lines = split_lines([&] {
    std::ifstream is(dir / "bands.tsv");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }());
  CHECK(band_lines.size() == 7); // 2 segments x 3 points + final node

  // identical rerun rewrites identical bytes (manifest excluded)
  auto before = slurp_outputs(dir);
  run_deck(scf_deck, workdir.string());
  run_deck(bands_deck, workdir.string());
  auto after = slurp_outputs(dir);
  REQUIRE(before.size() == after.size());
  for (const auto& [name, bytes] : before) {
    REQUIRE(after.count(name) == 1);
    CHECK_MESSAGE(after.at(name) == bytes, name);
  }

  // a deck whose pseudopotential cannot be resolved
  std::string missing = model_deck_text("scf", scf_kcard());
  std::size_t at = missing.find("X.pz-model.UPF");
  missing.replace(at, 14, "X.missing.UPF\n");
  std::istringstream bad(missing);
  Deck bad_deck = parse_deck(bad);
  CHECK_THROWS_AS(run_deck(bad_deck, workdir.string()), DependencyError);

  fs::remove_all(workdir);
}
