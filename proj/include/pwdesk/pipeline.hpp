#ifndef PWDESK_PIPELINE_HPP
#define PWDESK_PIPELINE_HPP

#include "pwdesk/deck.hpp"
#include "pwdesk/postproc.hpp"
#include "pwdesk/scf.hpp"

#include <string>
#include <vector>

namespace pwdesk {

/// Rigid-layer stacking recipe for the distance scans.
struct BindSystem {
  Layer top;
  Layer bottom;
  StackPattern pattern = StackPattern::I;
  double c = 20.0; // cell height (Ang)
  std::map<std::string, Pseudopotential> pseudos;
  D2Params d2 = default_d2_params();
  double extra_electrons = 0.0;
};

ScfSystem bind_scf_system(const BindSystem& bind, const Cell& cell);

/// The default interlayer scan: 2.5 to 4.5 Ang in 0.2 steps.
std::vector<double> default_d_scan();

struct BindingCurve {
  struct Row {
    double d = 0.0;            // Ang
    double e_total = 0.0;      // Ha
    double eb_per_atom = 0.0;  // meV per top-layer atom
    double eb_per_area = 0.0;  // meV / Ang^2
    bool converged = false;
  };
  std::vector<Row> rows; // sorted by d
  std::size_t n_top_atoms = 0;
  double area = 0.0; // in-plane cell area (Ang^2)
  bool has_minimum = false;
  double d_star = 0.0;  // Ang, parabola through the three lowest rows
  double eb_star = 0.0; // meV per atom at d_star

  std::string table() const; // per-distance TSV
  /// One-row summary in the configuration-table schema; the configuration
  /// column carries `label`, gap columns may be "n/a".
  std::string summary_table(const std::string& label,
                            const std::string& gap_lda_mev = "n/a",
                            const std::string& gap_hse_mev = "n/a") const;
};

/// Per-d SCF of the stacked bilayer with fixed isolated-layer references
/// (same lattice, same settings, computed once). Non-converged rows are
/// flagged and excluded from the minimum fit.
BindingCurve binding_curve(const BindSystem& bind,
                           const std::vector<double>& d_list,
                           const ScfOptions& opt);

struct GapTable {
  struct Row {
    double d = 0.0;
    double gap_mev = 0.0;
    std::string position;
    std::string type; // Direct / Indirect / Metallic
    bool converged = false;
  };
  std::vector<Row> rows;

  std::string table() const;
};

/// Per-d SCF -> bands -> gap along the hexagonal G-K-M-G path.
GapTable gap_vs_distance(const BindSystem& bind,
                         const std::vector<double>& d_list,
                         const ScfOptions& opt, int points_per_segment = 20);

struct StrainTable {
  struct Row {
    double eps = 0.0;
    double gap_mev = 0.0;
    std::string position;
    double e_total = 0.0; // Ha
    bool converged = false;
  };
  std::vector<Row> rows;

  std::string table() const;
};

/// Biaxial strain sweep (positive = tensile) with a full SCF and gap
/// analysis per point; row order follows eps_list.
StrainTable strain_sweep(const ScfSystem& sys,
                         const std::vector<double>& eps_list,
                         const ScfOptions& opt, int points_per_segment = 20);

/// Plain-text density persistence for the scf -> bands/dos/cdd handoff.
void save_density(std::ostream& os, const DensityGrid& density);
DensityGrid load_density(std::istream& is, const Cell& cell);

/// Resolves a pseudopotential filename against the deck's pseudo_dir and
/// the colon-separated search path (argument, then $PWDESK_PSEUDO_PATH).
/// Missing file -> DependencyError.
std::string find_pseudo_file(const std::string& filename,
                             const std::string& pseudo_dir,
                             const std::string& search_path = "");

struct ResolvedDeck {
  Deck deck;
  ScfSystem system;
  ScfOptions options;
  std::map<std::string, std::string> pseudo_paths; // per species
};

ResolvedDeck resolve_deck(const Deck& deck,
                          const std::string& search_path = "");

struct RunResult {
  std::string prefix_dir;            // workdir/prefix
  std::vector<std::string> outputs;  // file names under prefix_dir
  std::string manifest_file;         // manifest.json (timestamps live here)
};

/// Executes one deck under workdir/prefix. scf stores its density for the
/// dependent kinds; bands/dos/cdd refuse to run without it. Reruns with
/// identical inputs rewrite identical bytes (manifest excluded).
RunResult run_deck(const Deck& deck, const std::string& workdir,
                   const std::string& pseudo_search_path = "");

} // namespace pwdesk

#endif
