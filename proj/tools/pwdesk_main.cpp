#include "pwdesk/error.hpp"
#include "pwdesk/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

using namespace pwdesk;

namespace {

struct GlobalOpts {
  std::string deck_file;
  std::string workdir = ".";
  std::string format = "tsv";
  int threads = 0;
};

int run_deck_kind(const GlobalOpts& g, const std::string& kind) {
  if (g.deck_file.empty())
    throw InputError("this subcommand needs --deck FILE");
  Deck deck = load_deck(g.deck_file);
  deck.control.calculation = kind;
  RunResult res = run_deck(deck, g.workdir);
  if (g.format == "json") {
    nlohmann::json out;
    out["prefix_dir"] = res.prefix_dir;
    out["outputs"] = res.outputs;
    out["manifest"] = res.manifest_file;
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& f : res.outputs)
      std::cout << res.prefix_dir << "/" << f << "\n";
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"plane-wave DFT engine for 2D heterobilayer workflows"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--deck", g.deck_file, "input deck file");
  app.add_option("--workdir", g.workdir, "output directory");
  app.add_option("--threads", g.threads, "OpenMP thread count");
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"tsv", "json"}));

  for (const char* kind :
       {"scf", "bands", "dos", "bind-scan", "strain-scan", "cdd"})
    app.add_subcommand(kind, std::string("run a ") + kind + " deck");
  app.add_subcommand("pdos",
                     "run a dos deck (writes dos.tsv and pdos.tsv)");

  auto* mp = app.add_subcommand("mp-grid", "print a Monkhorst-Pack mesh");
  std::vector<int> mp_q = {1, 1, 1};
  mp->add_option("q", mp_q, "mesh divisions q1 q2 q3")->expected(3);

  auto* vp = app.add_subcommand("validate-pseudo",
                                "check a pseudopotential file's contracts");
  std::string vp_file;
  vp->add_option("file", vp_file, "pseudopotential file")->required();

  auto* pn = app.add_subcommand("parse-name",
                                "explain a UPF-style pseudopotential name");
  std::string pn_name;
  pn->add_option("name", pn_name, "filename to parse")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

#ifdef _OPENMP
  if (g.threads > 0) omp_set_num_threads(g.threads);
#endif

  try {
    for (const char* kind :
         {"scf", "bands", "dos", "bind-scan", "strain-scan", "cdd"})
      if (app.got_subcommand(kind)) return run_deck_kind(g, kind);
    if (app.got_subcommand("pdos")) return run_deck_kind(g, "dos");

    if (app.got_subcommand(mp)) {
      KMesh mesh = monkhorst_pack(mp_q[0], mp_q[1], mp_q[2]);
      if (g.format == "json") {
        nlohmann::json out;
        for (std::size_t i = 0; i < mesh.points.size(); ++i)
          out.push_back({{"k", {mesh.points[i].x(), mesh.points[i].y(),
                                mesh.points[i].z()}},
                         {"weight", mesh.weights[i]}});
        std::cout << out.dump(2) << "\n";
      } else {
        std::printf("kx\tky\tkz\tweight\n");
        for (std::size_t i = 0; i < mesh.points.size(); ++i)
          std::printf("%.10f\t%.10f\t%.10f\t%.10f\n", mesh.points[i].x(),
                      mesh.points[i].y(), mesh.points[i].z(),
                      mesh.weights[i]);
      }
      return 0;
    }

    if (app.got_subcommand(vp)) {
      Pseudopotential ps = load_pseudo(vp_file);
      ps.validate();
      if (g.format == "json") {
        nlohmann::json out;
        out["element"] = ps.element;
        out["z_valence"] = ps.z_valence;
        out["r_c_bohr"] = ps.r_c;
        out["channels"] = ps.projectors.size();
        out["valid"] = true;
        std::cout << out.dump(2) << "\n";
      } else {
        std::printf("element\t%s\nz_valence\t%g\nr_c (Bohr)\t%g\n"
                    "channels\t%zu\nvalid\tyes\n",
                    ps.element.c_str(), ps.z_valence, ps.r_c,
                    ps.projectors.size());
      }
      return 0;
    }

    if (app.got_subcommand(pn)) {
      PseudoMeta meta = parse_upf_name(pn_name);
      std::string states(meta.state_tags.begin(), meta.state_tags.end());
      if (g.format == "json") {
        nlohmann::json out;
        out["element"] = meta.element;
        out["element_known"] = meta.element_known;
        out["relativistic"] = meta.relativistic;
        out["xc"] = meta.xc_tag;
        out["states"] = states;
        out["origin"] = meta.origin_tags;
        std::cout << out.dump(2) << "\n";
      } else {
        std::printf("element\t%s\nelement_known\t%s\nrelativistic\t%s\n"
                    "xc\t%s\nstates\t%s\norigin\t",
                    meta.element.c_str(), meta.element_known ? "yes" : "no",
                    meta.relativistic ? "yes" : "no", meta.xc_tag.c_str(),
                    states.c_str());
        for (std::size_t i = 0; i < meta.origin_tags.size(); ++i)
          std::printf("%s%s", i ? "," : "", meta.origin_tags[i].c_str());
        std::printf("\n");
      }
      return 0;
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DependencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
