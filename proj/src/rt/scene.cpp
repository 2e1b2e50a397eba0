#include "ctwin/rt/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ctwin/io_util.hpp"
#include "ctwin/rng.hpp"

namespace ctwin::rt {

namespace {

constexpr const char *kHeader = "# ctwin scene v1";

SurfaceRole parse_role(const std::string &s, const std::string &where) {
    if (s == "ground_or_road")
        return SurfaceRole::ground_or_road;
    if (s == "wall")
        return SurfaceRole::wall;
    if (s == "roof")
        return SurfaceRole::roof;
    if (s == "clutter")
        return SurfaceRole::clutter;
    throw numeric_error(where + ": unknown role \"" + s + "\"");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Parses trailing `id=`/`role=` tokens shared by wall and roof records.
void parse_surface_extras(std::istringstream &ls, const std::string &where, std::string &id, SurfaceRole &role) {
    std::string tok;
    while (ls >> tok) {
        if (tok.rfind("id=", 0) == 0)
            id = tok.substr(3);
        else if (tok.rfind("role=", 0) == 0)
            role = parse_role(tok.substr(5), where);
        else
            throw numeric_error(where + ": unexpected token \"" + tok + "\"");
    }
}

} // namespace

const char *surface_role_name(SurfaceRole role) {
    switch (role) {
    case SurfaceRole::ground_or_road: return "ground_or_road";
    case SurfaceRole::wall: return "wall";
    case SurfaceRole::roof: return "roof";
    case SurfaceRole::clutter: return "clutter";
    }
    return "?";
}

double Scene::wavelength() const { return kSpeedOfLight / carrier_hz; }

void Scene::validate(const MaterialRegistry &registry) const {
    if (carrier_hz <= 0.0)
        throw dimension_error("scene: carrier frequency must be positive");
    if (tx == rx)
        throw dimension_error("scene: tx and rx coincide");
    registry.get(ground_material);
    std::set<std::string> ids;
    for (const Wall &w : walls) {
        if (w.x1 == w.x2 && w.y1 == w.y2)
            throw dimension_error("scene: degenerate wall " + w.id);
        if (w.height <= 0.0)
            throw dimension_error("scene: wall " + w.id + " has non-positive height");
        registry.get(w.material);
        if (!ids.insert(w.id).second)
            throw dimension_error("scene: duplicate surface id " + w.id);
    }
    for (const Roof &r : roofs) {
        if (r.xmin >= r.xmax || r.ymin >= r.ymax)
            throw dimension_error("scene: degenerate roof " + r.id);
        registry.get(r.material);
        if (!ids.insert(r.id).second)
            throw dimension_error("scene: duplicate surface id " + r.id);
    }
}

Scene load_scene(const std::string &path, const MaterialRegistry &registry) {
    std::ifstream is(path);
    if (!is)
        throw numeric_error("cannot open scene file: " + path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(is, line) || line != kHeader)
        throw numeric_error(path + ":1: expected header \"" + std::string(kHeader) + "\"");
    ++line_no;

    Scene scene;
    bool have_tx = false, have_rx = false;
    std::size_t auto_wall = 0, auto_roof = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string where = path + ":" + std::to_string(line_no);
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind))
            continue;
        if (kind == "freq") {
            if (!(ls >> scene.carrier_hz))
                throw numeric_error(where + ": expected `freq <hz>`");
        } else if (kind == "ground") {
            if (!(ls >> scene.ground_material))
                throw numeric_error(where + ": expected `ground <material>`");
        } else if (kind == "tx") {
            if (!(ls >> scene.tx.x >> scene.tx.y >> scene.tx.z))
                throw numeric_error(where + ": expected `tx <x> <y> <z>`");
            have_tx = true;
        } else if (kind == "rx") {
            if (!(ls >> scene.rx.x >> scene.rx.y >> scene.rx.z))
                throw numeric_error(where + ": expected `rx <x> <y> <z>`");
            have_rx = true;
        } else if (kind == "wall") {
            Wall w;
            if (!(ls >> w.x1 >> w.y1 >> w.x2 >> w.y2 >> w.height >> w.material))
                throw numeric_error(where + ": expected `wall <x1> <y1> <x2> <y2> <height> <material> ...`");
            w.id = "wall" + std::to_string(auto_wall++);
            parse_surface_extras(ls, where, w.id, w.role);
            scene.walls.push_back(std::move(w));
        } else if (kind == "roof") {
            Roof r;
            if (!(ls >> r.xmin >> r.ymin >> r.xmax >> r.ymax >> r.z >> r.material))
                throw numeric_error(where + ": expected `roof <xmin> <ymin> <xmax> <ymax> <z> <material> ...`");
            r.id = "roof" + std::to_string(auto_roof++);
            parse_surface_extras(ls, where, r.id, r.role);
            scene.roofs.push_back(std::move(r));
        } else {
            throw numeric_error(where + ": unknown record \"" + kind + "\"");
        }
    }
    if (!have_tx || !have_rx)
        throw numeric_error(path + ": scene must define tx and rx");
    try {
        scene.validate(registry);
    } catch (const dimension_error &e) {
        throw numeric_error(path + ": " + e.what());
    }
    return scene;
}

std::string scene_to_string(const Scene &scene) {
    std::ostringstream os;
    os << kHeader << "\n";
    os << "freq " << fmt(scene.carrier_hz) << "\n";
    os << "ground " << scene.ground_material << "\n";
    os << "tx " << fmt(scene.tx.x) << " " << fmt(scene.tx.y) << " " << fmt(scene.tx.z) << "\n";
    os << "rx " << fmt(scene.rx.x) << " " << fmt(scene.rx.y) << " " << fmt(scene.rx.z) << "\n";
    for (const Wall &w : scene.walls)
        os << "wall " << fmt(w.x1) << " " << fmt(w.y1) << " " << fmt(w.x2) << " " << fmt(w.y2) << " " << fmt(w.height)
           << " " << w.material << " id=" << w.id << " role=" << surface_role_name(w.role) << "\n";
    for (const Roof &r : scene.roofs)
        os << "roof " << fmt(r.xmin) << " " << fmt(r.ymin) << " " << fmt(r.xmax) << " " << fmt(r.ymax) << " "
           << fmt(r.z) << " " << r.material << " id=" << r.id << " role=" << surface_role_name(r.role) << "\n";
    return os.str();
}

void save_scene(const std::string &path, const Scene &scene) {
    io::AtomicFileWriter writer(path);
    writer.stream() << scene_to_string(scene);
    writer.commit();
}

Scene perturb_scene(const Scene &scene, const PerturbationConfig &cfg, MaterialRegistry &registry) {
    if (cfg.material_jitter < 0.0 || cfg.geometry_jitter < 0.0)
        throw dimension_error("perturb_scene: jitters must be non-negative");
    Rng rng(cfg.seed);
    Scene out = scene;

    // Jittered copies of every distinct material in use, registered once.
    if (cfg.material_jitter > 0.0) {
        std::vector<std::string> names{scene.ground_material};
        for (const Wall &w : scene.walls)
            names.push_back(w.material);
        for (const Roof &r : scene.roofs)
            names.push_back(r.material);
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        std::size_t serial = 0;
        for (const std::string &name : names) {
            Material m = registry.get(name);
            m.name = name + "_p" + std::to_string(serial++);
            m.a *= 1.0 + cfg.material_jitter * rng.uniform(-1.0, 1.0);
            m.c *= 1.0 + cfg.material_jitter * rng.uniform(-1.0, 1.0);
            if (!m.is_perfect_conductor)
                m.a = std::max(m.a, 1.0); // keep eps_r >= 1
            const std::string fresh = m.name;
            if (!registry.contains(fresh))
                registry.add(std::move(m));
            auto rename = [&](const std::string &old, std::string &slot) {
                if (slot == old)
                    slot = fresh;
            };
            rename(name, out.ground_material);
            for (Wall &w : out.walls)
                rename(name, w.material);
            for (Roof &r : out.roofs)
                rename(name, r.material);
        }
    }

    if (cfg.geometry_jitter > 0.0) {
        for (Wall &w : out.walls) {
            w.x1 += cfg.geometry_jitter * rng.uniform(-1.0, 1.0);
            w.y1 += cfg.geometry_jitter * rng.uniform(-1.0, 1.0);
            w.x2 += cfg.geometry_jitter * rng.uniform(-1.0, 1.0);
            w.y2 += cfg.geometry_jitter * rng.uniform(-1.0, 1.0);
        }
        for (Roof &r : out.roofs) {
            const double dx = cfg.geometry_jitter * rng.uniform(-1.0, 1.0);
            const double dy = cfg.geometry_jitter * rng.uniform(-1.0, 1.0);
            r.xmin += dx;
            r.xmax += dx;
            r.ymin += dy;
            r.ymax += dy;
        }
    }

    // Clutter boxes: 4 wall faces + 1 roof, dropped away from tx/rx.
    for (std::size_t b = 0; b < cfg.clutter_count; ++b) {
        const double size = rng.uniform(cfg.clutter_size_min, cfg.clutter_size_max);
        const double height = rng.uniform(cfg.clutter_size_min, cfg.clutter_size_max);
        // Place within the bounding region of the existing scene (fall back
        // to a box around tx/rx for empty scenes).
        double xmin = std::min(scene.tx.x, scene.rx.x) - 10.0, xmax = std::max(scene.tx.x, scene.rx.x) + 10.0;
        double ymin = std::min(scene.tx.y, scene.rx.y) - 10.0, ymax = std::max(scene.tx.y, scene.rx.y) + 10.0;
        for (const Wall &w : scene.walls) {
            xmin = std::min({xmin, w.x1, w.x2});
            xmax = std::max({xmax, w.x1, w.x2});
            ymin = std::min({ymin, w.y1, w.y2});
            ymax = std::max({ymax, w.y1, w.y2});
        }
        double cx = 0.0, cy = 0.0;
        for (int attempt = 0; attempt < 64; ++attempt) {
            cx = rng.uniform(xmin, xmax);
            cy = rng.uniform(ymin, ymax);
            const double d_tx = std::hypot(cx - scene.tx.x, cy - scene.tx.y);
            const double d_rx = std::hypot(cx - scene.rx.x, cy - scene.rx.y);
            if (d_tx > 2.0 * size && d_rx > 2.0 * size)
                break;
        }
        const double h2 = size / 2.0;
        const std::string base = "clutter" + std::to_string(b);
        const std::string mat = out.ground_material;
        auto face = [&](double ax, double ay, double bx, double by, int i) {
            Wall w;
            w.x1 = ax; w.y1 = ay; w.x2 = bx; w.y2 = by;
            w.height = height;
            w.material = mat;
            w.id = base + "_f" + std::to_string(i);
            w.role = SurfaceRole::clutter;
            out.walls.push_back(std::move(w));
        };
        face(cx - h2, cy - h2, cx + h2, cy - h2, 0);
        face(cx + h2, cy - h2, cx + h2, cy + h2, 1);
        face(cx + h2, cy + h2, cx - h2, cy + h2, 2);
        face(cx - h2, cy + h2, cx - h2, cy - h2, 3);
        Roof top;
        top.xmin = cx - h2; top.ymin = cy - h2;
        top.xmax = cx + h2; top.ymax = cy + h2;
        top.z = height;
        top.material = mat;
        top.id = base + "_top";
        top.role = SurfaceRole::clutter;
        out.roofs.push_back(std::move(top));
    }
    return out;
}

Scene material_choice(const Scene &scene, MaterialChoice choice) {
    std::string ground, wall, roof;
    switch (choice) {
    case MaterialChoice::mc1: ground = "itu_concrete"; wall = "itu_marble"; roof = "itu_metal"; break;
    case MaterialChoice::mc2: ground = "itu_concrete"; wall = "itu_marble"; roof = "itu_wood"; break;
    case MaterialChoice::mc3: ground = "itu_concrete"; wall = "itu_brick"; roof = "itu_wood"; break;
    }
    Scene out = scene;
    out.ground_material = ground;
    auto pick = [&](SurfaceRole role, const std::string &id) -> const std::string & {
        switch (role) {
        case SurfaceRole::ground_or_road: return ground;
        case SurfaceRole::wall: return wall;
        case SurfaceRole::roof: return roof;
        case SurfaceRole::clutter:
            throw dimension_error("material_choice: surface " + id +
                                  " has role clutter, which no material scheme covers");
        }
        throw dimension_error("material_choice: surface " + id + " has no role tag");
    };
    for (Wall &w : out.walls)
        w.material = pick(w.role, w.id);
    for (Roof &r : out.roofs)
        r.material = pick(r.role, r.id);
    return out;
}

} // namespace ctwin::rt
