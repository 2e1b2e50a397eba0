#pragma once

#include <string>
#include <vector>

#include "ctwin/common.hpp"

namespace ctwin::rt {

// Frequency-dependent electromagnetic surface description following the
// ITU-style two-power-law parameterization:
//   relative permittivity  eps_r = a * f_GHz^b
//   conductivity [S/m]     sigma = c * f_GHz^d
struct Material {
    std::string name;
    double a = 1.0, b = 0.0; // permittivity model
    double c = 0.0, d = 0.0; // conductivity model
    double scattering_coefficient = 0.0;
    bool is_perfect_conductor = false;

    double permittivity(double frequency_hz) const;
    double conductivity(double frequency_hz) const;
    // Complex relative permittivity eps_r - j*sigma/(2*pi*f*eps0).
    cplx complex_permittivity(double frequency_hz) const;
    void validate() const; // throws dimension_error on violated invariants
};

// Registry file format ("# ctwin materials v1" header line):
//   name a b c d scattering [pec]
// one material per line, '#' comments.
class MaterialRegistry {
  public:
    void add(Material m); // throws on duplicate name or invalid material
    const Material &get(const std::string &name) const; // throws if unknown
    bool contains(const std::string &name) const;
    const std::vector<Material> &all() const { return materials_; }

  private:
    std::vector<Material> materials_;
};

MaterialRegistry load_materials(const std::string &path);
void save_materials(const std::string &path, const MaterialRegistry &registry);

// Registry from the CTWIN_MATERIALS environment variable if set, otherwise
// from data/itu_materials.txt relative to the working directory.
MaterialRegistry default_materials();

// Location the default registry would load from (for error messages/tools).
std::string default_materials_path();

} // namespace ctwin::rt
