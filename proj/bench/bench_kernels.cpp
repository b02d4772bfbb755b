// Benchmarks the OpenMP kernels against their serial reference
// implementations and reports timings plus the max deviation.

#include "pwdesk/d2.hpp"
#include "pwdesk/structure.hpp"
#include "pwdesk/xc.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

using namespace pwdesk;

namespace {

double time_of(const std::function<void()>& f, int repeats) {
  // one warm-up, then best-of-N
  f();
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial_s, double parallel_s,
            double deviation) {
  std::printf("%-18s serial %8.4f s   parallel %8.4f s   speedup %5.2fx   "
              "max dev %.3e\n",
              name, serial_s, parallel_s, serial_s / parallel_s, deviation);
}

Cell bilayer_cell() {
  Layer ge = make_honeycomb_layer(3.89, "Ge", "Ge", 0.69, 4.0, 4.0);
  Layer gap = make_honeycomb_layer(3.89, "Ga", "P", 0.38, 3.0, 5.0);
  return build_heterobilayer(ge, gap, StackPattern::I, 3.70, 20.0);
}

} // namespace

int main() {
  const int repeats = 3;

  {
    Cell cell = bilayer_cell();
    D2Params params = default_d2_params();
    double cutoff = 120.0; // Ang; large enough to make the sum expensive
    double e_par = 0.0, e_ser = 0.0;
    double t_par = time_of([&] { e_par = grimme_d2(cell, params, cutoff); },
                           repeats);
    double t_ser = time_of(
        [&] { e_ser = grimme_d2_serial(cell, params, cutoff); }, repeats);
    report("grimme_d2", t_ser, t_par, std::abs(e_par - e_ser));
  }

  {
    Cell cell = bilayer_cell();
    DensityGrid density = make_density_grid(cell, {96, 96, 240});
    for (std::size_t i = 0; i < density.size(); ++i)
      density.values[i] = 0.02 + 0.01 * std::sin(0.37 * double(i));
    XcResult par, ser;
    double t_par = time_of(
        [&] { par = evaluate_xc(XcKind::pbe, density, cell, true); }, repeats);
    double t_ser = time_of(
        [&] { ser = evaluate_xc(XcKind::pbe, density, cell, false); },
        repeats);
    double dev = std::abs(par.total - ser.total);
    for (std::size_t i = 0; i < par.potential.size(); ++i)
      dev = std::max(dev, std::abs(par.potential[i] - ser.potential[i]));
    report("evaluate_xc/pbe", t_ser, t_par, dev);
  }

  return 0;
}
