#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctwin/ofdm/ofdm.hpp"
#include "ctwin/rt/scene.hpp"

namespace ctwin::rt {

enum class InteractionKind : std::uint8_t { reflection, diffraction, scatter };

const char *interaction_kind_name(InteractionKind k);

struct Interaction {
    InteractionKind kind;
    std::string surface_id;

    bool operator==(const Interaction &) const = default;
    auto operator<=>(const Interaction &) const = default;
};

struct Path {
    double delay_s = 0.0;
    cplx amplitude;
    double departure_azimuth = 0.0;   // radians, from +x toward +y
    double departure_elevation = 0.0; // radians, from horizontal toward +z
    std::vector<Interaction> trace;   // empty = line of sight

    bool is_los() const { return trace.empty(); }
};

struct PathList {
    std::vector<Path> paths;
};

// Shooting-and-bouncing-rays configuration. ray_count is the fidelity knob
// (typical tiers 1e3 / 1e4 / 1e5). reception_radius is the capture-sphere
// radius at the 1e4-ray reference tier; with auto_radius the effective
// radius scales as sqrt(1/ray_count) (i.e. radius * sqrt(1e4/ray_count)) so
// the expected rays captured per path stay fidelity-independent. Fixed-
// radius runs (auto_radius=false) make the discovered path set of a larger
// ray count a superset of a smaller one under the same seed, because ray
// directions depend only on (seed, ray index).
struct TraceConfig {
    std::size_t ray_count = 10000;
    int max_reflections = 3;
    bool enable_diffraction = true;
    bool enable_scattering = true;
    double reception_radius = 1.0; // meters at the 1e4-ray tier
    bool auto_radius = true;
    std::uint64_t seed = 0;

    double effective_radius() const;
    void validate() const;
};

// Traces the scene for scene.rx only.
PathList trace(const Scene &scene, const TraceConfig &cfg, const MaterialRegistry &registry);

// Traces once and registers paths for every rx position (rays are launched
// from tx and are rx-independent, so this costs one ray sweep total).
// Returns one PathList per position, in input order.
std::vector<PathList> trace_batch(const Scene &scene, const TraceConfig &cfg, const std::vector<Vec3> &rx_positions,
                                  const MaterialRegistry &registry);

// Uniform linear transmit array; element t sits at tx + t * spacing * axis,
// spacing in wavelengths of the carrier. Element 0 is the phase reference.
struct ArrayConfig {
    std::size_t antenna_count = 4;
    double spacing_wavelengths = 0.5;
    Vec3 axis{0.0, 1.0, 0.0};
};

struct CirResult {
    ofdm::Cir cir;
    double dropped_energy_fraction = 0.0; // energy of paths beyond tap eta-1
};

// Bins paths into an eta-tap CIR on the 1/sample_rate grid, one tap vector
// per array element with far-field phase offsets from the departure
// direction. Delays are referenced to reference_delay when given (so twin
// and truth CIRs of the same link share a grid), otherwise to the earliest
// path.
CirResult paths_to_cir(const PathList &paths, const ArrayConfig &array, double sample_rate, std::size_t max_taps,
                       std::optional<double> reference_delay = std::nullopt);

} // namespace ctwin::rt
