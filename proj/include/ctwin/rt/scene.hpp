#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctwin/rt/geometry.hpp"
#include "ctwin/rt/material.hpp"

namespace ctwin::rt {

// Role a surface plays when a material scheme is applied. Clutter surfaces
// (added by perturb_scene) are deliberately outside the scheme's reach.
enum class SurfaceRole : std::uint8_t { ground_or_road, wall, roof, clutter };

const char *surface_role_name(SurfaceRole role);

// Vertical rectangle: footprint segment (x1,y1)-(x2,y2), z in [0, height].
struct Wall {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double height = 0;
    std::string material;
    std::string id;
    SurfaceRole role = SurfaceRole::wall;
};

// Horizontal rectangle [xmin,xmax] x [ymin,ymax] at height z.
struct Roof {
    double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
    double z = 0;
    std::string material;
    std::string id;
    SurfaceRole role = SurfaceRole::roof;
};

// 2.5D scene: vertical walls and horizontal roofs over an infinite ground
// plane at z = 0.
struct Scene {
    std::vector<Wall> walls;
    std::vector<Roof> roofs;
    std::string ground_material = "itu_concrete";
    Vec3 tx;
    Vec3 rx;
    double carrier_hz = 751e6;

    double wavelength() const;
    // Checks the structural invariants (ids unique, segments non-degenerate,
    // tx != rx, material ids resolvable in the registry).
    void validate(const MaterialRegistry &registry) const;
};

// Scene file ("# ctwin scene v1" header line, '#' comments):
//   freq <hz>
//   ground <material>
//   tx <x> <y> <z>
//   rx <x> <y> <z>
//   wall <x1> <y1> <x2> <y2> <height> <material> [id=<name>] [role=<role>]
//   roof <xmin> <ymin> <xmax> <ymax> <z> <material> [id=<name>] [role=<role>]
// Surfaces without an explicit id are assigned wall<N>/roof<N> in file order.
Scene load_scene(const std::string &path, const MaterialRegistry &registry);
void save_scene(const std::string &path, const Scene &scene);
std::string scene_to_string(const Scene &scene); // canonical serialization

// Synthetic ground-truth generator: jitters wall/roof geometry, multiplies
// material parameters by (1 +- material_jitter), and drops random clutter
// boxes (4 walls + 1 roof each, role=clutter) into the scene. Deterministic
// per seed; tx/rx/carrier unchanged. Jittered materials are materialized as
// new registry entries (suffix _p<N>) in `registry`.
struct PerturbationConfig {
    std::size_t clutter_count = 0;
    double clutter_size_min = 0.5;  // meters
    double clutter_size_max = 2.0;  // meters
    double material_jitter = 0.0;   // relative eps_r / sigma fraction
    double geometry_jitter = 0.0;   // meters
    std::uint64_t seed = 0;
};

Scene perturb_scene(const Scene &scene, const PerturbationConfig &cfg, MaterialRegistry &registry);

// The three material schemes of the material study (ground_or_road / wall /
// roof): MC1 concrete/marble/metal, MC2 concrete/marble/wood, MC3
// concrete/brick/wood.
enum class MaterialChoice { mc1, mc2, mc3 };

Scene material_choice(const Scene &scene, MaterialChoice choice);

} // namespace ctwin::rt
