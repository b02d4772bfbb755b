#include "pwdesk/deck.hpp"

#include "pwdesk/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace pwdesk {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// strips quotes and a trailing comma from a namelist value
std::string clean_value(std::string v) {
  v = trim(v);
  if (!v.empty() && v.back() == ',') v = trim(v.substr(0, v.size() - 1));
  if (v.size() >= 2 && (v.front() == '\'' || v.front() == '"') &&
      v.back() == v.front())
    v = v.substr(1, v.size() - 2);
  return v;
}

double parse_double(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("bad numeric value '" + v + "' for " + key, line);
  }
}

int parse_int(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("bad integer value '" + v + "' for " + key, line);
  }
}

bool is_card_header(const std::string& t, std::string* name,
                    std::string* option) {
  std::istringstream is(t);
  std::string head;
  is >> head;
  std::string h = lower(head);
  if (h != "atomic_species" && h != "atomic_positions" && h != "k_points")
    return false;
  *name = h;
  std::string rest = trim(t.substr(head.size() == t.size()
                                       ? t.size()
                                       : t.find(head) + head.size()));
  for (char open : {'(', '{'}) {
    char close = open == '(' ? ')' : '}';
    std::size_t b = rest.find(open);
    if (b != std::string::npos) {
      std::size_t e = rest.find(close, b);
      if (e != std::string::npos) {
        *option = lower(trim(rest.substr(b + 1, e - b - 1)));
        return true;
      }
    }
  }
  *option = lower(rest);
  return true;
}

struct Lines {
  std::vector<std::string> text; // raw, 0-based
  std::size_t pos = 0;

  bool done() const { return pos >= text.size(); }
  int lineno() const { return int(pos) + 1; }
};

} // namespace

double default_valence(const std::string& element) {
  static const std::map<std::string, double> table = {
      {"H", 1},  {"B", 3},  {"C", 4},  {"N", 5},  {"O", 6},
      {"Al", 3}, {"Si", 4}, {"P", 5},  {"S", 6},  {"Ga", 3},
      {"Ge", 4}, {"As", 5}, {"In", 3}, {"Sn", 4}, {"Sb", 5}};
  auto it = table.find(element);
  return it == table.end() ? 0.0 : it->second;
}

Deck parse_deck(std::istream& is, const std::string& name) {
  Lines src;
  for (std::string line; std::getline(is, line);) src.text.push_back(line);

  Deck deck;
  bool saw_control = false, saw_system = false, saw_electrons = false;
  bool saw_species = false, saw_positions = false, saw_kpoints = false;

  auto content = [&](std::size_t i) {
    // comment stripping for namelist lines; card lines keep their '!'
    std::string t = src.text[i];
    std::size_t bang = t.find('!');
    if (bang != std::string::npos) t = t.substr(0, bang);
    return trim(t);
  };

  while (!src.done()) {
    std::string t = content(src.pos);
    if (t.empty()) {
      ++src.pos;
      continue;
    }

    if (t[0] == '&') {
      std::string section = lower(trim(t.substr(1)));
      int start_line = src.lineno();
      ++src.pos;
      bool terminated = false;
      std::vector<std::pair<std::string, std::pair<std::string, int>>> kv;
      while (!src.done()) {
        std::string u = content(src.pos);
        if (u == "/") {
          terminated = true;
          ++src.pos;
          break;
        }
        if (!u.empty()) {
          if (u[0] == '&')
            throw ParseError("unterminated &" + section + " section",
                             start_line);
          std::size_t eq = u.find('=');
          if (eq == std::string::npos)
            throw ParseError("expected key = value in &" + section,
                             src.lineno());
          std::string key = lower(trim(u.substr(0, eq)));
          std::string val = clean_value(u.substr(eq + 1));
          kv.push_back({key, {val, src.lineno()}});
        }
        ++src.pos;
      }
      if (!terminated)
        throw ParseError("unterminated &" + section + " section", start_line);

      if (section == "control") {
        saw_control = true;
        for (auto& [key, vl] : kv) {
          const auto& [v, ln] = vl;
          if (key == "calculation") deck.control.calculation = lower(v);
          else if (key == "outdir") deck.control.outdir = v;
          else if (key == "prefix") deck.control.prefix = v;
          else if (key == "pseudo_dir") deck.control.pseudo_dir = v;
          else if (key == "restart_mode") deck.control.restart_mode = v;
          else if (key == "verbosity") deck.control.verbosity = v;
          else deck.warnings.push_back("unknown &control key: " + key);
        }
      } else if (section == "system") {
        saw_system = true;
        for (auto& [key, vl] : kv) {
          const auto& [v, ln] = vl;
          if (key == "ibrav") deck.system.ibrav = parse_int(v, key, ln);
          else if (key == "a") deck.system.a = parse_double(v, key, ln);
          else if (key == "c") deck.system.c = parse_double(v, key, ln);
          else if (key == "nat") deck.system.nat = parse_int(v, key, ln);
          else if (key == "ntyp") deck.system.ntyp = parse_int(v, key, ln);
          else if (key == "ecutwfc")
            deck.system.ecutwfc = parse_double(v, key, ln);
          else if (key == "ecutrho")
            deck.system.ecutrho = parse_double(v, key, ln);
          else if (key == "occupations") deck.system.occupations = lower(v);
          else if (key == "smearing") deck.system.smearing = lower(v);
          else if (key == "degauss")
            deck.system.degauss = parse_double(v, key, ln);
          else if (key == "input_dft") deck.system.input_dft = lower(v);
          else if (key == "vdw_corr") deck.system.vdw_corr = v;
          else deck.warnings.push_back("unknown &system key: " + key);
        }
      } else if (section == "electrons") {
        saw_electrons = true;
        for (auto& [key, vl] : kv) {
          const auto& [v, ln] = vl;
          if (key == "conv_thr")
            deck.electrons.conv_thr = parse_double(v, key, ln);
          else if (key == "mixing_beta")
            deck.electrons.mixing_beta = parse_double(v, key, ln);
          else deck.warnings.push_back("unknown &electrons key: " + key);
        }
      } else {
        deck.warnings.push_back("unknown section: &" + section);
      }
      continue;
    }

    std::string card, option;
    if (!is_card_header(t, &card, &option))
      throw ParseError("unexpected line outside any section: " + t,
                       src.lineno());
    ++src.pos;

    auto next_data_line = [&](const char* what) -> std::pair<std::string, int> {
      while (!src.done()) {
        std::string raw = trim(src.text[src.pos]);
        if (!raw.empty()) return {raw, src.lineno()};
        ++src.pos;
      }
      throw ParseError(std::string("unexpected end of file in ") + what,
                       int(src.text.size()));
    };

    if (card == "atomic_species") {
      saw_species = true;
      int count = deck.system.ntyp;
      if (count <= 0)
        throw ParseError("ATOMIC_SPECIES requires ntyp in &SYSTEM",
                         src.lineno());
      for (int i = 0; i < count; ++i) {
        auto [raw, ln] = next_data_line("ATOMIC_SPECIES");
        std::istringstream ls(raw);
        Deck::Species sp;
        std::string mass;
        if (!(ls >> sp.symbol >> mass >> sp.pseudo))
          throw ParseError("expected 'symbol mass pseudo': " + raw, ln);
        sp.mass = parse_double(mass, "mass", ln);
        deck.species.push_back(sp);
        ++src.pos;
      }
    } else if (card == "atomic_positions") {
      saw_positions = true;
      if (option != "angstrom")
        throw ParseError("only ATOMIC_POSITIONS (angstrom) is supported",
                         src.lineno() - 1);
      int count = deck.system.nat;
      if (count <= 0)
        throw ParseError("ATOMIC_POSITIONS requires nat in &SYSTEM",
                         src.lineno());
      for (int i = 0; i < count; ++i) {
        auto [raw, ln] = next_data_line("ATOMIC_POSITIONS");
        std::istringstream ls(raw);
        Deck::Position p;
        std::string x, y, z;
        if (!(ls >> p.symbol >> x >> y >> z))
          throw ParseError("expected 'symbol x y z': " + raw, ln);
        p.xyz = {parse_double(x, "x", ln), parse_double(y, "y", ln),
                 parse_double(z, "z", ln)};
        deck.positions.push_back(p);
        ++src.pos;
      }
    } else if (card == "k_points") {
      saw_kpoints = true;
      deck.kpoints.mode = option;
      if (option == "automatic") {
        auto [raw, ln] = next_data_line("K_POINTS");
        std::istringstream ls(raw);
        std::string tok[6];
        if (!(ls >> tok[0] >> tok[1] >> tok[2] >> tok[3] >> tok[4] >> tok[5]))
          throw ParseError("expected 'n1 n2 n3 s1 s2 s3': " + raw, ln);
        for (int i = 0; i < 6; ++i)
          deck.kpoints.mesh[i] = parse_int(tok[i], "k-mesh", ln);
        ++src.pos;
      } else if (option == "crystal_b") {
        auto [raw, ln] = next_data_line("K_POINTS");
        int nn = parse_int(raw, "node count", ln);
        ++src.pos;
        for (int i = 0; i < nn; ++i) {
          auto [nodeline, nln] = next_data_line("K_POINTS");
          std::string label;
          std::size_t bang = nodeline.find('!');
          if (bang != std::string::npos) {
            label = trim(nodeline.substr(bang + 1));
            nodeline = trim(nodeline.substr(0, bang));
          }
          std::istringstream ls(nodeline);
          std::string x, y, z, count;
          if (!(ls >> x >> y >> z >> count))
            throw ParseError("expected 'x y z count [!label]': " + nodeline,
                             nln);
          KPathNode node;
          node.label = label.empty() ? std::to_string(i) : label;
          node.k = {parse_double(x, "kx", nln), parse_double(y, "ky", nln),
                    parse_double(z, "kz", nln)};
          deck.kpoints.path_nodes.push_back(node);
          deck.kpoints.path_counts.push_back(parse_int(count, "count", nln));
          ++src.pos;
        }
      } else {
        throw ParseError("unsupported K_POINTS mode: " + option,
                         src.lineno() - 1);
      }
    }
  }

  if (!saw_control) throw ParseError(name + ": missing &CONTROL section");
  if (!saw_system) throw ParseError(name + ": missing &SYSTEM section");
  if (!saw_electrons) throw ParseError(name + ": missing &ELECTRONS section");
  if (!saw_species) throw ParseError(name + ": missing ATOMIC_SPECIES card");
  if (!saw_positions)
    throw ParseError(name + ": missing ATOMIC_POSITIONS card");
  if (!saw_kpoints) throw ParseError(name + ": missing K_POINTS card");

  static const char* kinds[] = {"scf", "bands", "dos", "bind-scan",
                                "strain-scan", "cdd"};
  if (std::find(std::begin(kinds), std::end(kinds),
                deck.control.calculation) == std::end(kinds))
    throw ParseError(name +
                     ": unknown calculation kind: " + deck.control.calculation);

  if (int(deck.positions.size()) != deck.system.nat)
    throw ParseError(name + ": nat does not match ATOMIC_POSITIONS");
  if (int(deck.species.size()) != deck.system.ntyp)
    throw ParseError(name + ": ntyp does not match ATOMIC_SPECIES");
  for (const auto& p : deck.positions) {
    bool known = false;
    for (const auto& sp : deck.species) known |= sp.symbol == p.symbol;
    if (!known)
      throw ParseError(name + ": undeclared species in positions: " +
                       p.symbol);
  }
  if (deck.control.calculation == "bands" && deck.kpoints.mode != "crystal_b")
    throw ParseError(name + ": bands calculation needs K_POINTS {crystal_b}");
  return deck;
}

Deck load_deck(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open deck: " + path);
  return parse_deck(is, path);
}

std::string Deck::serialize() const {
  std::ostringstream os;
  char buf[160];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return std::string(buf);
  };

  os << "&CONTROL\n";
  os << "calculation = \"" << control.calculation << "\"\n";
  os << "outdir = \"" << control.outdir << "\"\n";
  os << "prefix = \"" << control.prefix << "\"\n";
  if (!control.pseudo_dir.empty())
    os << "pseudo_dir = \"" << control.pseudo_dir << "\"\n";
  os << "restart_mode = \"" << control.restart_mode << "\"\n";
  os << "verbosity = \"" << control.verbosity << "\"\n";
  os << "/\n&SYSTEM\n";
  os << "ibrav = " << system.ibrav << "\n";
  os << "a = " << num(system.a) << "\n";
  os << "c = " << num(system.c) << "\n";
  os << "nat = " << system.nat << "\n";
  os << "ntyp = " << system.ntyp << "\n";
  os << "ecutwfc = " << num(system.ecutwfc) << "\n";
  if (system.ecutrho > 0.0) os << "ecutrho = " << num(system.ecutrho) << "\n";
  os << "occupations = \"" << system.occupations << "\"\n";
  os << "smearing = \"" << system.smearing << "\"\n";
  os << "degauss = " << num(system.degauss) << "\n";
  os << "input_dft = \"" << system.input_dft << "\"\n";
  if (!system.vdw_corr.empty())
    os << "vdw_corr = \"" << system.vdw_corr << "\"\n";
  os << "/\n&ELECTRONS\n";
  os << "conv_thr = " << num(electrons.conv_thr) << "\n";
  os << "mixing_beta = " << num(electrons.mixing_beta) << "\n";
  os << "/\nATOMIC_SPECIES\n";
  for (const auto& sp : species)
    os << sp.symbol << " " << num(sp.mass) << " " << sp.pseudo << "\n";
  os << "ATOMIC_POSITIONS (angstrom)\n";
  for (const auto& p : positions) {
    std::snprintf(buf, sizeof buf, "%s %.9f %.9f %.9f\n", p.symbol.c_str(),
                  p.xyz.x(), p.xyz.y(), p.xyz.z());
    os << buf;
  }
  if (kpoints.mode == "automatic") {
    os << "K_POINTS {automatic}\n";
    for (int i = 0; i < 6; ++i)
      os << kpoints.mesh[i] << (i == 5 ? "\n" : " ");
  } else {
    os << "K_POINTS {crystal_b}\n" << kpoints.path_nodes.size() << "\n";
    for (std::size_t i = 0; i < kpoints.path_nodes.size(); ++i) {
      const KPathNode& n = kpoints.path_nodes[i];
      std::snprintf(buf, sizeof buf, "%.7f %.7f %.7f %d !%s\n", n.k.x(),
                    n.k.y(), n.k.z(), kpoints.path_counts[i],
                    n.label.c_str());
      os << buf;
    }
  }
  return os.str();
}

Cell Deck::build_cell() const {
  if (system.ibrav != 4)
    throw InputError("only ibrav = 4 (hexagonal) cells are supported");
  if (system.a <= 0.0 || system.c <= 0.0)
    throw InputError("deck cell needs positive a and c");
  Cell cell = build_hexagonal_cell(system.a, system.c);
  for (const auto& p : positions)
    cell.add_atom(p.symbol, p.xyz, default_valence(p.symbol));
  cell.validate();
  return cell;
}

} // namespace pwdesk
