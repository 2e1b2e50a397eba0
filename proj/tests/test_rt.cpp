// Ray-channel tests: materials registry, scene files and perturbation,
// Fresnel reflection/diffraction against independent quadrature oracles,
// and the shooting-and-bouncing-rays tracer against image-method geometry
// computed from scratch in the test.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctwin/rt/fresnel.hpp"
#include "ctwin/rt/material.hpp"
#include "ctwin/rt/scene.hpp"
#include "ctwin/rt/trace.hpp"

using namespace ctwin;
using namespace ctwin::rt;

namespace {

MaterialRegistry itu_registry() { return load_materials("data/itu_materials.txt"); }

std::string read_file(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// Composite Simpson quadrature, the independent oracle for the Fresnel
// integrals C(x) = int_0^x cos(pi/2 t^2) dt and S(x) likewise with sin.
template <typename F> double simpson(F f, double a, double b, int n) {
    if (n % 2)
        ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

std::string key_of(const Path &p) {
    if (p.trace.empty())
        return "los";
    std::string k;
    for (const Interaction &i : p.trace) {
        k += interaction_kind_name(i.kind);
        k += ':';
        k += i.surface_id;
        k += '|';
    }
    return k;
}

std::set<std::string> key_set(const PathList &pl) {
    std::set<std::string> out;
    for (const Path &p : pl.paths)
        out.insert(key_of(p));
    return out;
}

std::string serialize_paths(const PathList &pl) {
    std::ostringstream os;
    os.precision(17);
    for (const Path &p : pl.paths)
        os << key_of(p) << " " << p.delay_s << " " << p.amplitude.real() << " " << p.amplitude.imag() << " "
           << p.departure_azimuth << " " << p.departure_elevation << "\n";
    return os.str();
}

// Adds a rectangular building (4 walls + roof) to a scene.
void add_building(Scene &s, const std::string &tag, double xa, double ya, double xb, double yb, double h,
                  const std::string &wall_mat, const std::string &roof_mat) {
    auto wall = [&](double x1, double y1, double x2, double y2, const char *suffix) {
        Wall w;
        w.x1 = x1; w.y1 = y1; w.x2 = x2; w.y2 = y2;
        w.height = h;
        w.material = wall_mat;
        w.id = tag + suffix;
        s.walls.push_back(std::move(w));
    };
    wall(xa, ya, xb, ya, "_s");
    wall(xa, yb, xb, yb, "_n");
    wall(xa, ya, xa, yb, "_w");
    wall(xb, ya, xb, yb, "_e");
    Roof r;
    r.xmin = xa; r.ymin = ya; r.xmax = xb; r.ymax = yb;
    r.z = h;
    r.material = roof_mat;
    r.id = tag + "_roof";
    s.roofs.push_back(std::move(r));
}

} // namespace

// ---------------------------------------------------------------------------
// materials
// ---------------------------------------------------------------------------

TEST_CASE("materials: registry loads the shipped table and evaluates the frequency model") {
    MaterialRegistry reg = itu_registry();
    CHECK(reg.all().size() == 8);
    const Material &c = reg.get("itu_concrete");
    CHECK(c.permittivity(751e6) == doctest::Approx(5.24).epsilon(1e-12));
    CHECK(c.conductivity(751e6) == doctest::Approx(0.0462 * std::pow(0.751, 0.7822)).epsilon(1e-12));
    const cplx eps = c.complex_permittivity(751e6);
    CHECK(eps.real() == doctest::Approx(5.24));
    CHECK(eps.imag() < 0.0); // lossy: -j sigma / (2 pi f eps0)
    CHECK(eps.imag() ==
          doctest::Approx(-c.conductivity(751e6) / (kTwoPi * 751e6 * kVacuumPermittivity)).epsilon(1e-12));
    CHECK(reg.get("itu_metal").is_perfect_conductor);
    CHECK_FALSE(reg.contains("adamantium"));
    CHECK_THROWS_AS((void)reg.get("adamantium"), dimension_error);
}

TEST_CASE("materials: duplicate names and unphysical parameters are rejected") {
    MaterialRegistry reg = itu_registry();
    Material dup = reg.get("itu_wood");
    CHECK_THROWS_AS(reg.add(dup), dimension_error);

    Material thin;
    thin.name = "thin_air";
    thin.a = 0.5; // eps_r < 1 is unphysical for these surfaces
    CHECK_THROWS_AS(thin.validate(), dimension_error);

    Material bad_s = reg.get("itu_wood");
    bad_s.name = "soggy_wood";
    bad_s.scattering_coefficient = 1.5;
    CHECK_THROWS_AS(bad_s.validate(), dimension_error);
}

TEST_CASE("materials: file round trip preserves every coefficient") {
    MaterialRegistry reg = itu_registry();
    const std::string tmp = "build/rt_tmp_materials.txt";
    save_materials(tmp, reg);
    MaterialRegistry back = load_materials(tmp);
    REQUIRE(back.all().size() == reg.all().size());
    for (const Material &m : reg.all()) {
        const Material &b = back.get(m.name);
        CHECK(b.a == m.a);
        CHECK(b.b == m.b);
        CHECK(b.c == m.c);
        CHECK(b.d == m.d);
        CHECK(b.scattering_coefficient == m.scattering_coefficient);
        CHECK(b.is_perfect_conductor == m.is_perfect_conductor);
    }
    std::remove(tmp.c_str());
}

TEST_CASE("materials: loader reports the offending line and honours CTWIN_MATERIALS") {
    const std::string tmp = "build/rt_tmp_bad_materials.txt";
    {
        std::ofstream os(tmp);
        os << "# ctwin materials v1\n";
        os << "ok_mat 2.0 0 0.01 0.5 0.1\n";
        os << "broken 2.0 0\n";
    }
    try {
        (void)load_materials(tmp);
        FAIL("expected numeric_error");
    } catch (const numeric_error &e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    {
        std::ofstream os(tmp);
        os << "not the right header\n";
    }
    try {
        (void)load_materials(tmp);
        FAIL("expected numeric_error");
    } catch (const numeric_error &e) {
        CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
    std::remove(tmp.c_str());

    setenv("CTWIN_MATERIALS", "/some/override.txt", 1);
    CHECK(default_materials_path() == "/some/override.txt");
    unsetenv("CTWIN_MATERIALS");
    CHECK(default_materials_path() == "data/itu_materials.txt");
}

// ---------------------------------------------------------------------------
// scenes
// ---------------------------------------------------------------------------

TEST_CASE("scene: demo scene loads with the expected structure") {
    MaterialRegistry reg = itu_registry();
    Scene s = load_scene("scenes/demo.scene", reg);
    CHECK(s.walls.size() == 40); // 10 structures x 4 faces
    CHECK(s.roofs.size() == 10);
    CHECK(s.carrier_hz == doctest::Approx(751e6));
    CHECK(s.tx.z == doctest::Approx(20.0));
    CHECK(s.rx.z == doctest::Approx(1.5));
    CHECK(s.ground_material == "itu_concrete");
    CHECK(s.wavelength() == doctest::Approx(kSpeedOfLight / 751e6));
    bool found = false;
    for (const Wall &w : s.walls)
        if (w.id == "p9_s") {
            found = true;
            CHECK(w.height == doctest::Approx(4.0));
            CHECK(w.role == SurfaceRole::wall);
        }
    CHECK(found);
}

TEST_CASE("scene: save(load(x)) is a fixed point of the canonical form") {
    MaterialRegistry reg = itu_registry();
    Scene s = load_scene("scenes/demo.scene", reg);
    const std::string tmp1 = "build/rt_tmp_scene1.scene";
    const std::string tmp2 = "build/rt_tmp_scene2.scene";
    save_scene(tmp1, s);
    Scene s2 = load_scene(tmp1, reg);
    save_scene(tmp2, s2);
    CHECK(read_file(tmp1) == read_file(tmp2));
    CHECK(scene_to_string(s) == scene_to_string(s2));
    std::remove(tmp1.c_str());
    std::remove(tmp2.c_str());
}

TEST_CASE("scene: loader errors carry line numbers; validation names the bad surface") {
    MaterialRegistry reg = itu_registry();
    const std::string tmp = "build/rt_tmp_scene_bad.scene";
    {
        std::ofstream os(tmp);
        os << "# ctwin scene v1\n";
        os << "tx 0 0 5\n";
        os << "rx 10 0 1.5\n";
        os << "teleporter 1 2 3\n";
    }
    try {
        (void)load_scene(tmp, reg);
        FAIL("expected numeric_error");
    } catch (const numeric_error &e) {
        CHECK(std::string(e.what()).find(":4") != std::string::npos);
        CHECK(std::string(e.what()).find("teleporter") != std::string::npos);
    }
    {
        std::ofstream os(tmp);
        os << "# ctwin scene v1\n";
        os << "tx 0 0 5\n";
        os << "rx 10 0 1.5\n";
        os << "wall 0 0 1 0 3 itu_brick id=dup\n";
        os << "wall 0 1 1 1 3 itu_brick id=dup\n";
    }
    try {
        (void)load_scene(tmp, reg);
        FAIL("expected numeric_error");
    } catch (const numeric_error &e) {
        CHECK(std::string(e.what()).find("dup") != std::string::npos);
    }
    std::remove(tmp.c_str());
}

TEST_CASE("scene: perturbation is deterministic, counted, and identity at zero strength") {
    MaterialRegistry reg = itu_registry();
    Scene s = load_scene("scenes/demo.scene", reg);

    PerturbationConfig zero;
    MaterialRegistry reg_a = itu_registry();
    Scene same = perturb_scene(s, zero, reg_a);
    CHECK(scene_to_string(same) == scene_to_string(s));
    CHECK(reg_a.all().size() == reg.all().size()); // no jitter -> no new materials

    PerturbationConfig cfg;
    cfg.clutter_count = 3;
    cfg.material_jitter = 0.3;
    cfg.geometry_jitter = 0.05;
    cfg.seed = 42;
    MaterialRegistry reg_b = itu_registry();
    MaterialRegistry reg_c = itu_registry();
    Scene p1 = perturb_scene(s, cfg, reg_b);
    Scene p2 = perturb_scene(s, cfg, reg_c);
    CHECK(scene_to_string(p1) == scene_to_string(p2)); // same seed, same scene
    CHECK(p1.walls.size() == s.walls.size() + 4 * cfg.clutter_count);
    CHECK(p1.roofs.size() == s.roofs.size() + cfg.clutter_count);
    std::size_t clutter_walls = 0;
    for (const Wall &w : p1.walls)
        if (w.role == SurfaceRole::clutter)
            ++clutter_walls;
    CHECK(clutter_walls == 4 * cfg.clutter_count);
    CHECK(reg_b.all().size() > reg.all().size()); // jittered copies materialized
    bool renamed = false;
    for (const Wall &w : p1.walls)
        if (w.material.find("_p") != std::string::npos)
            renamed = true;
    CHECK(renamed);
    p1.validate(reg_b); // perturbed scene must stay structurally sound
    CHECK(p1.tx == s.tx);
    CHECK(p1.rx == s.rx);

    MaterialRegistry reg_d = itu_registry();
    PerturbationConfig other = cfg;
    other.seed = 43;
    Scene p3 = perturb_scene(s, other, reg_d);
    CHECK(scene_to_string(p3) != scene_to_string(p1)); // seed matters
}

TEST_CASE("scene: material schemes rewrite by role and refuse clutter") {
    MaterialRegistry reg = itu_registry();
    Scene s = load_scene("scenes/demo.scene", reg);

    Scene m1 = material_choice(s, MaterialChoice::mc1);
    CHECK(m1.ground_material == "itu_concrete");
    for (const Wall &w : m1.walls)
        CHECK(w.material == "itu_marble");
    for (const Roof &r : m1.roofs)
        CHECK(r.material == "itu_metal");

    Scene m3 = material_choice(s, MaterialChoice::mc3);
    for (const Wall &w : m3.walls)
        CHECK(w.material == "itu_brick");
    for (const Roof &r : m3.roofs)
        CHECK(r.material == "itu_wood");

    // Idempotent: applying a scheme twice equals applying it once.
    CHECK(scene_to_string(material_choice(m3, MaterialChoice::mc3)) == scene_to_string(m3));
    // A scheme applied on top of another scheme fully overrides it.
    CHECK(scene_to_string(material_choice(m3, MaterialChoice::mc1)) == scene_to_string(m1));

    PerturbationConfig cfg;
    cfg.clutter_count = 1;
    cfg.seed = 1;
    MaterialRegistry reg2 = itu_registry();
    Scene cluttered = perturb_scene(s, cfg, reg2);
    try {
        (void)material_choice(cluttered, MaterialChoice::mc2);
        FAIL("expected dimension_error");
    } catch (const dimension_error &e) {
        CHECK(std::string(e.what()).find("clutter0") != std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// fresnel reflection and diffraction
// ---------------------------------------------------------------------------

TEST_CASE("fresnel: normal incidence on eps_r=4 gives -1/3 for both polarizations") {
    Material m;
    m.name = "eps4";
    m.a = 4.0;
    const cplx te = fresnel_reflection(m, 0.0, 751e6, Polarization::te);
    const cplx tm = fresnel_reflection(m, 0.0, 751e6, Polarization::tm);
    CHECK(std::abs(te - cplx(-1.0 / 3.0, 0.0)) < 1e-12);
    CHECK(std::abs(tm - cplx(-1.0 / 3.0, 0.0)) < 1e-12);
}

TEST_CASE("fresnel: perfect conductor reflects with unit magnitude at every angle") {
    MaterialRegistry reg = itu_registry();
    const Material &pec = reg.get("itu_metal");
    for (double deg : {0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 89.0}) {
        const double th = deg * kPi / 180.0;
        CHECK(std::abs(fresnel_reflection(pec, th, 751e6, Polarization::te) - cplx(-1.0, 0.0)) < 1e-15);
        CHECK(std::abs(fresnel_reflection(pec, th, 751e6, Polarization::tm) - cplx(1.0, 0.0)) < 1e-15);
    }
}

TEST_CASE("fresnel: grazing incidence approaches total reflection even for lossy stone") {
    MaterialRegistry reg = itu_registry();
    const Material &c = reg.get("itu_concrete");
    const double th = 89.9 * kPi / 180.0;
    CHECK(std::abs(fresnel_reflection(c, th, 751e6, Polarization::te)) > 0.95);
    CHECK(std::abs(fresnel_reflection(c, th, 751e6, Polarization::tm)) > 0.95);
    CHECK_THROWS_AS(fresnel_reflection(c, kPi / 2.0, 751e6, Polarization::te), dimension_error);
    CHECK_THROWS_AS(fresnel_reflection(c, -0.1, 751e6, Polarization::te), dimension_error);
}

TEST_CASE("fresnel: reflection magnitude never exceeds one for the shipped materials") {
    MaterialRegistry reg = itu_registry();
    for (const Material &m : reg.all())
        for (int i = 0; i < 90; ++i) {
            const double th = i * kPi / 180.0;
            CHECK(std::abs(fresnel_reflection(m, th, 751e6, Polarization::te)) <= 1.0 + 1e-12);
            CHECK(std::abs(fresnel_reflection(m, th, 751e6, Polarization::tm)) <= 1.0 + 1e-12);
        }
}

TEST_CASE("fresnel integrals match Simpson quadrature of the defining integral") {
    for (double x : {0.1, 0.3, 0.8, 1.0, 1.5, 1.6, 2.0, 2.5, 3.7, 5.0, -1.2, -2.8}) {
        const int n = 20000;
        const double c_ref = simpson([](double t) { return std::cos(kPi / 2.0 * t * t); }, 0.0, x, n);
        const double s_ref = simpson([](double t) { return std::sin(kPi / 2.0 * t * t); }, 0.0, x, n);
        double c = 0.0, s = 0.0;
        fresnel_integrals(x, c, s);
        CHECK(std::abs(c - c_ref) < 5e-8);
        CHECK(std::abs(s - s_ref) < 5e-8);
    }
}

TEST_CASE("knife edge: canonical attenuation values") {
    // Grazing the edge: exactly half the free-space field, 6.02 dB.
    const double loss0 = -20.0 * std::log10(std::abs(knife_edge_diffraction(0.0)));
    CHECK(loss0 == doctest::Approx(6.0206).epsilon(1e-3));
    // v = 1 sits in the textbook 13.5 +- 0.5 dB window.
    const double loss1 = -20.0 * std::log10(std::abs(knife_edge_diffraction(1.0)));
    CHECK(loss1 > 13.0);
    CHECK(loss1 < 14.0);
    // Far below the edge the field recovers free space.
    CHECK(std::abs(knife_edge_diffraction(-10.0)) == doctest::Approx(1.0).epsilon(0.04));
    // Deeper shadow attenuates more.
    CHECK(std::abs(knife_edge_diffraction(3.0)) < std::abs(knife_edge_diffraction(1.0)));
    CHECK(std::abs(knife_edge_diffraction(8.0)) < std::abs(knife_edge_diffraction(3.0)));
}

// ---------------------------------------------------------------------------
// tracer: exact geometry oracles
// ---------------------------------------------------------------------------

TEST_CASE("trace: line of sight over bare ground is exact and ray-count independent") {
    MaterialRegistry reg = itu_registry();
    Scene s;
    s.tx = {0.0, 0.0, 5.0};
    s.rx = {20.0, 0.0, 1.5};
    TraceConfig cfg;
    cfg.ray_count = 1; // LoS must not depend on the ray sweep
    cfg.max_reflections = 0;
    cfg.enable_scattering = false;
    cfg.enable_diffraction = false;
    PathList pl = trace(s, cfg, reg);
    REQUIRE(pl.paths.size() == 1);
    const Path &p = pl.paths[0];
    CHECK(p.is_los());
    const double d = std::sqrt(20.0 * 20.0 + 3.5 * 3.5);
    CHECK(std::abs(p.delay_s - d / kSpeedOfLight) < 1e-12);
    const double lambda = s.wavelength();
    CHECK(std::abs(std::abs(p.amplitude) - lambda / (4.0 * kPi * d)) < 1e-15);
    const double phase = -kTwoPi * s.carrier_hz * d / kSpeedOfLight;
    CHECK(std::abs(p.amplitude - lambda / (4.0 * kPi * d) * std::exp(cplx(0.0, phase))) < 1e-12);
    CHECK(p.departure_azimuth == doctest::Approx(0.0));
    CHECK(p.departure_elevation == doctest::Approx(std::atan2(-3.5, 20.0)));
}

TEST_CASE("trace: ground bounce matches the image method to a nanosecond and better") {
    MaterialRegistry reg = itu_registry();
    Scene s;
    s.tx = {0.0, 0.0, 5.0};
    s.rx = {20.0, 0.0, 1.5};
    TraceConfig cfg;
    cfg.ray_count = 30000;
    cfg.max_reflections = 1;
    cfg.enable_scattering = false;
    cfg.enable_diffraction = false;
    cfg.auto_radius = false;
    cfg.reception_radius = 2.0;
    PathList pl = trace(s, cfg, reg);
    REQUIRE(pl.paths.size() == 2);
    REQUIRE(pl.paths[1].trace.size() == 1);
    CHECK(pl.paths[1].trace[0].kind == InteractionKind::reflection);
    CHECK(pl.paths[1].trace[0].surface_id == "ground");

    // Independent image construction: mirror tx through z=0.
    const double d_img = std::sqrt(20.0 * 20.0 + 6.5 * 6.5);
    CHECK(std::abs(pl.paths[1].delay_s - d_img / kSpeedOfLight) < 1e-9);
    CHECK(std::abs(pl.paths[1].delay_s - d_img / kSpeedOfLight) < 1e-15); // snapped, not binned

    // Amplitude: TM reflection (vertical polarization on a horizontal face)
    // at the image-method incidence angle, spread over the unfolded length.
    const double cos_inc = 6.5 / d_img; // angle from the vertical normal
    const double theta = std::acos(cos_inc);
    const cplx gamma = fresnel_reflection(reg.get("itu_concrete"), theta, s.carrier_hz, Polarization::tm);
    const double lambda = s.wavelength();
    const cplx expected =
        gamma * lambda / (4.0 * kPi * d_img) * std::exp(cplx(0.0, -kTwoPi * s.carrier_hz * d_img / kSpeedOfLight));
    CHECK(std::abs(pl.paths[1].amplitude - expected) < 1e-9 * std::abs(expected) + 1e-18);

    // The specular bounce is the shortest single-bounce route: delay ordering.
    CHECK(pl.paths[0].is_los());
    CHECK(pl.paths[1].delay_s > pl.paths[0].delay_s);
}

TEST_CASE("trace: wall reflection snaps to the image solution") {
    MaterialRegistry reg = itu_registry();
    Scene s;
    s.tx = {0.0, 0.0, 3.0};
    s.rx = {4.0, 1.0, 1.5};
    Wall w;
    w.x1 = 10.0; w.y1 = -6.0; w.x2 = 10.0; w.y2 = 6.0;
    w.height = 10.0;
    w.material = "itu_brick";
    w.id = "screen";
    s.walls.push_back(w);

    TraceConfig cfg;
    cfg.ray_count = 30000;
    cfg.max_reflections = 1;
    cfg.enable_scattering = false;
    cfg.enable_diffraction = false;
    cfg.auto_radius = false;
    cfg.reception_radius = 2.0;
    PathList pl = trace(s, cfg, reg);

    // LoS + ground bounce + wall bounce.
    REQUIRE(pl.paths.size() == 3);
    const Path *wall_path = nullptr;
    for (const Path &p : pl.paths)
        if (!p.trace.empty() && p.trace[0].surface_id == "screen")
            wall_path = &p;
    REQUIRE(wall_path != nullptr);

    // Image of tx across the x=10 plane is (20, 0, 3).
    const double dx = 20.0 - 4.0, dy = 0.0 - 1.0, dz = 3.0 - 1.5;
    const double d_img = std::sqrt(dx * dx + dy * dy + dz * dz);
    CHECK(std::abs(wall_path->delay_s - d_img / kSpeedOfLight) < 1e-9);

    // TE reflection (vertical polarization on a vertical face); incidence
    // angle from the wall normal (+-x).
    const double cos_inc = std::abs(dx) / d_img;
    const cplx gamma = fresnel_reflection(reg.get("itu_brick"), std::acos(cos_inc), s.carrier_hz, Polarization::te);
    const double lambda = s.wavelength();
    const cplx expected =
        gamma * lambda / (4.0 * kPi * d_img) * std::exp(cplx(0.0, -kTwoPi * s.carrier_hz * d_img / kSpeedOfLight));
    CHECK(std::abs(wall_path->amplitude - expected) < 1e-9 * std::abs(expected) + 1e-18);

    // Departure direction points from tx to the specular point on the wall.
    const double t_hit = 10.0 / 16.0; // where tx->image-to-rx line crosses x=10
    const Vec3 spec{10.0, 0.0 + t_hit * (1.0 - 0.0), 3.0 + t_hit * (1.5 - 3.0)};
    const Vec3 dir = (spec - s.tx).normalized();
    CHECK(wall_path->departure_azimuth == doctest::Approx(std::atan2(dir.y, dir.x)).epsilon(1e-9));
    CHECK(wall_path->departure_elevation == doctest::Approx(std::asin(dir.z)).epsilon(1e-9));
}

TEST_CASE("trace: blocked link produces knife-edge paths over and around the screen") {
    MaterialRegistry reg = itu_registry();
    Scene s;
    s.tx = {0.0, 0.0, 2.0};
    s.rx = {20.0, 0.0, 2.0};
    Wall w;
    w.x1 = 10.0; w.y1 = -5.0; w.x2 = 10.0; w.y2 = 5.0;
    w.height = 6.0;
    w.material = "itu_brick";
    w.id = "screen";
    s.walls.push_back(w);

    TraceConfig cfg;
    cfg.ray_count = 1;
    cfg.max_reflections = 0;
    cfg.enable_scattering = false;
    cfg.enable_diffraction = true;
    PathList pl = trace(s, cfg, reg);

    // No LoS; one path per edge of the blocking screen (top and both sides).
    REQUIRE(pl.paths.size() == 3);
    for (const Path &p : pl.paths) {
        REQUIRE(p.trace.size() == 1);
        CHECK(p.trace[0].kind == InteractionKind::diffraction);
    }
    const Path *top = nullptr;
    for (const Path &p : pl.paths)
        if (p.trace[0].surface_id == "screen#top")
            top = &p;
    REQUIRE(top != nullptr);

    // Symmetric geometry: the shortest over-the-top detour crosses (10,0,6).
    const double leg = std::sqrt(10.0 * 10.0 + 4.0 * 4.0);
    const double detour = 2.0 * leg;
    CHECK(top->delay_s == doctest::Approx(detour / kSpeedOfLight).epsilon(1e-9));

    // Independent Fresnel parameter: clearance 4 m above the direct line.
    const double lambda = s.wavelength();
    const double nu = 4.0 * std::sqrt(2.0 * (leg + leg) / (lambda * leg * leg));
    const double expected_mag = std::abs(knife_edge_diffraction(nu)) * lambda / (4.0 * kPi * detour);
    CHECK(std::abs(top->amplitude) == doctest::Approx(expected_mag).epsilon(1e-6));

    // The side detours are longer and therefore arrive later.
    for (const Path &p : pl.paths)
        if (&p != top)
            CHECK(p.delay_s > top->delay_s);
}

TEST_CASE("trace: scatter path exists, arrives no earlier than the specular bounce, and respects the cap") {
    MaterialRegistry reg = itu_registry();
    Scene s;
    s.tx = {0.0, 0.0, 5.0};
    s.rx = {20.0, 0.0, 1.5};
    TraceConfig cfg;
    cfg.ray_count = 4000;
    cfg.max_reflections = 1;
    cfg.enable_scattering = true;
    cfg.enable_diffraction = false;
    cfg.auto_radius = false;
    cfg.reception_radius = 2.0;
    PathList pl = trace(s, cfg, reg);
    REQUIRE(pl.paths.size() == 3); // LoS + ground specular + one deduped ground scatter
    const Path *spec = nullptr, *scat = nullptr;
    for (const Path &p : pl.paths) {
        if (p.trace.size() == 1 && p.trace[0].kind == InteractionKind::reflection)
            spec = &p;
        if (!p.trace.empty() && p.trace.back().kind == InteractionKind::scatter)
            scat = &p;
    }
    REQUIRE(spec != nullptr);
    REQUIRE(scat != nullptr);
    CHECK(scat->trace.back().surface_id == "ground");
    // The specular point minimizes path length among single-ground-bounce routes.
    CHECK(scat->delay_s >= spec->delay_s - 1e-12);
}

// ---------------------------------------------------------------------------
// tracer: structural invariants on the demo scene
// ---------------------------------------------------------------------------

TEST_CASE("trace: fixed-radius path sets nest as the ray count grows") {
    MaterialRegistry reg = itu_registry();
    Scene s = load_scene("scenes/demo.scene", reg);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TraceConfig lo;
        lo.ray_count = 1000;
        lo.seed = seed;
        lo.auto_radius = false;
        lo.reception_radius = 1.5;
        TraceConfig hi = lo;
        hi.ray_count = 10000;
        const std::set<std::string> lo_keys = key_set(trace(s, lo, reg));
        const std::set<std::string> hi_keys = key_set(trace(s, hi, reg));
        for (const std::string &k : lo_keys) {
            INFO("seed ", seed, " key ", k);
            CHECK(hi_keys.count(k) == 1);
        }
        CHECK(hi_keys.size() >= lo_keys.size());
    }
}

TEST_CASE("trace: every path respects the light cone and free-space passivity") {
    MaterialRegistry reg = itu_registry();
    Scene s = load_scene("scenes/demo.scene", reg);
    TraceConfig cfg;
    cfg.ray_count = 20000;
    PathList pl = trace(s, cfg, reg);
    REQUIRE(pl.paths.size() >= 6); // rich multipath expected on the demo scene
    const double d_los = distance(s.tx, s.rx);
    const double lambda = s.wavelength();
    bool has_los = false;
    for (const Path &p : pl.paths) {
        has_los = has_los || p.is_los();
        CHECK(p.delay_s >= d_los / kSpeedOfLight - 1e-12);
        // No interaction chain may beat free-space spreading over its own length.
        const double bound = lambda / (4.0 * kPi * kSpeedOfLight * p.delay_s);
        CHECK(std::abs(p.amplitude) <= bound * (1.0 + 1e-9));
    }
    CHECK(has_los);
    // Canonical ordering: nondecreasing delay.
    for (std::size_t i = 1; i < pl.paths.size(); ++i)
        CHECK(pl.paths[i].delay_s >= pl.paths[i - 1].delay_s - 1e-15);
}

TEST_CASE("trace: reruns are bit-identical and batch tracing equals one-at-a-time tracing") {
    MaterialRegistry reg = itu_registry();
    Scene s = load_scene("scenes/demo.scene", reg);
    TraceConfig cfg;
    cfg.ray_count = 5000;
    CHECK(serialize_paths(trace(s, cfg, reg)) == serialize_paths(trace(s, cfg, reg)));

    const std::vector<Vec3> rxs{{54.0, 20.0, 1.5}, {30.0, 24.0, 1.5}, {16.0, 20.0, 1.8}};
    const std::vector<PathList> batch = trace_batch(s, cfg, rxs, reg);
    REQUIRE(batch.size() == rxs.size());
    for (std::size_t i = 0; i < rxs.size(); ++i) {
        Scene one = s;
        one.rx = rxs[i];
        CHECK(serialize_paths(batch[i]) == serialize_paths(trace(one, cfg, reg)));
    }
}

TEST_CASE("trace: specular channel is reciprocal") {
    MaterialRegistry reg = itu_registry();
    Scene fwd; // street canyon: buildings flank the tx->rx line on both sides
    fwd.tx = {0.0, 0.0, 6.0};
    fwd.rx = {25.0, 0.0, 1.5};
    add_building(fwd, "north", 5.0, 5.0, 20.0, 11.0, 8.0, "itu_marble", "itu_metal");
    add_building(fwd, "south", 5.0, -11.0, 20.0, -5.0, 8.0, "itu_marble", "itu_metal");
    Scene rev = fwd;
    std::swap(rev.tx, rev.rx);

    TraceConfig cfg;
    cfg.ray_count = 30000;
    cfg.max_reflections = 2;
    cfg.enable_scattering = false; // the scatter lobe model is not reciprocal
    cfg.enable_diffraction = true;
    cfg.auto_radius = false;
    cfg.reception_radius = 2.0;

    PathList a = trace(fwd, cfg, reg);
    PathList b = trace(rev, cfg, reg);
    REQUIRE(a.paths.size() >= 4);
    REQUIRE(a.paths.size() == b.paths.size());

    // Reversed interaction sequences must appear in the reverse trace...
    std::set<std::string> b_keys = key_set(b);
    for (const Path &p : a.paths) {
        Path r = p;
        std::reverse(r.trace.begin(), r.trace.end());
        INFO("path ", key_of(p));
        CHECK(b_keys.count(key_of(r)) == 1);
    }
    // ...with identical delay and magnitude spectra.
    std::vector<double> da, db, ma, mb;
    for (const Path &p : a.paths) {
        da.push_back(p.delay_s);
        ma.push_back(std::abs(p.amplitude));
    }
    for (const Path &p : b.paths) {
        db.push_back(p.delay_s);
        mb.push_back(std::abs(p.amplitude));
    }
    std::sort(da.begin(), da.end());
    std::sort(db.begin(), db.end());
    std::sort(ma.begin(), ma.end());
    std::sort(mb.begin(), mb.end());
    for (std::size_t i = 0; i < da.size(); ++i) {
        CHECK(std::abs(da[i] - db[i]) < 1e-9);
        CHECK(std::abs(ma[i] - mb[i]) < 1e-9 * ma[i] + 1e-18);
    }
}

TEST_CASE("trace: reception radius scales with the fidelity tier") {
    TraceConfig cfg;
    cfg.reception_radius = 1.0;
    cfg.ray_count = 10000;
    CHECK(cfg.effective_radius() == doctest::Approx(1.0).epsilon(1e-15));
    cfg.ray_count = 100;
    CHECK(cfg.effective_radius() == doctest::Approx(10.0).epsilon(1e-12));
    cfg.ray_count = 1000000;
    CHECK(cfg.effective_radius() == doctest::Approx(0.1).epsilon(1e-12));
    cfg.auto_radius = false;
    CHECK(cfg.effective_radius() == doctest::Approx(1.0).epsilon(1e-15));

    TraceConfig bad;
    bad.ray_count = 0;
    CHECK_THROWS_AS(bad.validate(), dimension_error);
    bad.ray_count = 10;
    bad.reception_radius = 0.0;
    CHECK_THROWS_AS(bad.validate(), dimension_error);
}

// ---------------------------------------------------------------------------
// CIR synthesis
// ---------------------------------------------------------------------------

TEST_CASE("paths_to_cir: broadside and steered departures set the array phases") {
    ArrayConfig arr; // 4 antennas, half-wavelength, axis +y
    PathList pl;
    Path p;
    p.delay_s = 0.0;
    p.amplitude = cplx(0.5, -0.25);
    p.departure_azimuth = 0.0; // +x: broadside to the y-axis array
    p.departure_elevation = 0.0;
    pl.paths.push_back(p);

    CirResult r = paths_to_cir(pl, arr, 30.72e6, 16);
    REQUIRE(r.cir.taps.size() == 4);
    REQUIRE(r.cir.taps[0].size() == 16);
    for (std::size_t t = 0; t < 4; ++t)
        CHECK(std::abs(r.cir.taps[t][0] - p.amplitude) < 1e-15);
    CHECK(r.dropped_energy_fraction == 0.0);

    // Endfire: direction along the array axis, phase step pi per element.
    pl.paths[0].departure_azimuth = kPi / 2.0;
    r = paths_to_cir(pl, arr, 30.72e6, 16);
    for (std::size_t t = 0; t < 4; ++t) {
        const cplx expected = p.amplitude * std::exp(cplx(0.0, kPi * static_cast<double>(t)));
        CHECK(std::abs(r.cir.taps[t][0] - expected) < 1e-12);
    }
}

TEST_CASE("paths_to_cir: delays bin on the sample grid and energy is conserved") {
    const double fs = 30.72e6;
    ArrayConfig arr;
    arr.antenna_count = 2;
    PathList pl;
    Path a;
    a.delay_s = 1e-6;
    a.amplitude = cplx(1.0, 0.0);
    Path b = a;
    b.delay_s = 1e-6 + 3.0 / fs;
    b.amplitude = cplx(0.0, 0.5);
    pl.paths.push_back(a);
    pl.paths.push_back(b);

    CirResult r = paths_to_cir(pl, arr, fs, 16);
    // Earliest path defines tap zero.
    CHECK(std::abs(r.cir.taps[0][0] - a.amplitude) < 1e-15);
    CHECK(std::abs(r.cir.taps[0][3] - b.amplitude) < 1e-15);
    CHECK(r.dropped_energy_fraction == 0.0);
    double energy = 0.0;
    for (const auto &tap_row : r.cir.taps)
        for (const cplx &h : tap_row)
            energy += std::norm(h);
    const double expected = 2.0 * (std::norm(a.amplitude) + std::norm(b.amplitude));
    CHECK(energy == doctest::Approx(expected).epsilon(1e-12));

    // A path beyond the tap window is dropped and accounted for.
    Path far = a;
    far.delay_s = 1e-6 + 20.0 / fs;
    far.amplitude = cplx(0.0, 2.0);
    pl.paths.push_back(far);
    r = paths_to_cir(pl, arr, fs, 16);
    const double total = std::norm(a.amplitude) + std::norm(b.amplitude) + std::norm(far.amplitude);
    CHECK(r.dropped_energy_fraction == doctest::Approx(std::norm(far.amplitude) / total).epsilon(1e-12));

    // An explicit reference delay shifts the grid; paths before it are dropped.
    r = paths_to_cir(pl, arr, fs, 16, a.delay_s + 1.0 / fs);
    CHECK(std::abs(r.cir.taps[0][2] - b.amplitude) < 1e-15); // bin 3 - 1
    CHECK(r.dropped_energy_fraction > 0.0);                  // path a fell off the front

    // Empty input: all-zero CIR.
    CirResult empty = paths_to_cir(PathList{}, arr, fs, 8);
    for (const auto &tap_row : empty.cir.taps)
        for (const cplx &h : tap_row)
            CHECK(h == cplx(0.0, 0.0));
    CHECK(empty.dropped_energy_fraction == 0.0);
}
