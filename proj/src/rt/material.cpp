#include "ctwin/rt/material.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctwin/io_util.hpp"

namespace ctwin::rt {

namespace {
constexpr const char *kHeader = "# ctwin materials v1";
constexpr const char *kDefaultPath = "data/itu_materials.txt";
} // namespace

double Material::permittivity(double frequency_hz) const {
    const double f_ghz = frequency_hz / 1e9;
    return a * std::pow(f_ghz, b);
}

double Material::conductivity(double frequency_hz) const {
    const double f_ghz = frequency_hz / 1e9;
    return c * std::pow(f_ghz, d);
}

cplx Material::complex_permittivity(double frequency_hz) const {
    const double eps_r = permittivity(frequency_hz);
    const double sigma = conductivity(frequency_hz);
    return {eps_r, -sigma / (kTwoPi * frequency_hz * kVacuumPermittivity)};
}

void Material::validate() const {
    if (name.empty())
        throw dimension_error("material: empty name");
    if (scattering_coefficient < 0.0 || scattering_coefficient > 1.0)
        throw dimension_error("material " + name + ": scattering coefficient outside [0,1]");
    // eps_r >= 1 over the band the toolkit evaluates (0.1 .. 100 GHz).
    if (!is_perfect_conductor)
        for (double f : {0.1e9, 0.751e9, 1e9, 10e9, 100e9})
            if (permittivity(f) < 1.0)
                throw dimension_error("material " + name + ": relative permittivity below 1 at " +
                                      std::to_string(f / 1e9) + " GHz");
}

void MaterialRegistry::add(Material m) {
    m.validate();
    if (contains(m.name))
        throw dimension_error("materials: duplicate name " + m.name);
    materials_.push_back(std::move(m));
}

const Material &MaterialRegistry::get(const std::string &name) const {
    for (const Material &m : materials_)
        if (m.name == name)
            return m;
    throw dimension_error("materials: unknown material id \"" + name + "\"");
}

bool MaterialRegistry::contains(const std::string &name) const {
    for (const Material &m : materials_)
        if (m.name == name)
            return true;
    return false;
}

MaterialRegistry load_materials(const std::string &path) {
    std::ifstream is(path);
    if (!is)
        throw numeric_error("cannot open materials registry: " + path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(is, line) || line != kHeader)
        throw numeric_error(path + ":1: expected header \"" + std::string(kHeader) + "\"");
    ++line_no;
    MaterialRegistry reg;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        Material m;
        if (!(ls >> m.name))
            continue; // blank or comment-only line
        std::string pec;
        if (!(ls >> m.a >> m.b >> m.c >> m.d >> m.scattering_coefficient))
            throw numeric_error(path + ":" + std::to_string(line_no) + ": expected `name a b c d scattering [pec]`");
        if (ls >> pec) {
            if (pec != "pec")
                throw numeric_error(path + ":" + std::to_string(line_no) + ": unexpected token \"" + pec + "\"");
            m.is_perfect_conductor = true;
        }
        try {
            reg.add(std::move(m));
        } catch (const dimension_error &e) {
            throw numeric_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return reg;
}

void save_materials(const std::string &path, const MaterialRegistry &registry) {
    io::AtomicFileWriter writer(path);
    std::ostream &os = writer.stream();
    os << kHeader << "\n";
    char buf[256];
    for (const Material &m : registry.all()) {
        std::snprintf(buf, sizeof buf, "%s %.17g %.17g %.17g %.17g %.17g", m.name.c_str(), m.a, m.b, m.c, m.d,
                      m.scattering_coefficient);
        os << buf;
        if (m.is_perfect_conductor)
            os << " pec";
        os << "\n";
    }
    writer.commit();
}

std::string default_materials_path() {
    const char *env = std::getenv("CTWIN_MATERIALS");
    return env != nullptr && *env != '\0' ? std::string(env) : std::string(kDefaultPath);
}

MaterialRegistry default_materials() { return load_materials(default_materials_path()); }

} // namespace ctwin::rt
