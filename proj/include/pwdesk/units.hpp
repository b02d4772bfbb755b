#ifndef PWDESK_UNITS_HPP
#define PWDESK_UNITS_HPP

// Internal units are Hartree atomic units (Bohr, Hartree).
// Cell geometry and deck files speak Angstrom / Rydberg; all conversions
// happen through the constants below (CODATA 2018).
namespace pwdesk::units {

inline constexpr double bohr_in_angstrom = 0.529177210903;
inline constexpr double angstrom_in_bohr = 1.0 / bohr_in_angstrom;
inline constexpr double hartree_in_ev    = 27.211386245988;
inline constexpr double hartree_in_ry    = 2.0;
inline constexpr double ry_in_hartree    = 0.5;
inline constexpr double pi               = 3.141592653589793238462643383279502884;

inline constexpr double angstrom_to_bohr(double a) { return a * angstrom_in_bohr; }
inline constexpr double bohr_to_angstrom(double b) { return b * bohr_in_angstrom; }
inline constexpr double ry_to_hartree(double e)    { return e * ry_in_hartree; }
inline constexpr double hartree_to_ev(double e)    { return e * hartree_in_ev; }
inline constexpr double ev_to_hartree(double e)    { return e / hartree_in_ev; }

} // namespace pwdesk::units

#endif
