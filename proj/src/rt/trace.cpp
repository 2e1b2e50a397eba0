#include "ctwin/rt/trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "ctwin/rng.hpp"
#include "ctwin/rt/fresnel.hpp"

namespace ctwin::rt {

namespace {

constexpr double kHitEps = 1e-9;      // minimum ray parameter for a hit
constexpr double kFarDistance = 1e5;  // segment length for escaped rays
constexpr std::size_t kScatterRayCap = 5000; // rays that spawn scatter paths

// ---- flattened surface list -------------------------------------------------

struct Surf {
    enum Kind : int { wall = 0, horizontal = 1, ground = 2 } kind;
    Vec3 origin; // wall: (x1,y1,0); horizontal: (xmin,ymin,z); ground: (0,0,0)
    Vec3 udir;   // wall only: unit footprint direction
    double len = 0.0;    // wall: footprint length; horizontal: x extent
    double height = 0.0; // wall: z extent; horizontal: y extent
    Vec3 normal; // unit; walls: horizontal, one of the two sides; else +z
    const Material *material = nullptr;
    const std::string *id = nullptr;
    double scattering = 0.0;
    Polarization pol = Polarization::te;
};

struct Geometry {
    std::vector<Surf> surfs;
    double frequency;
    double wavelength;
};

Geometry build_geometry(const Scene &scene, const MaterialRegistry &registry) {
    Geometry g;
    g.frequency = scene.carrier_hz;
    g.wavelength = scene.wavelength();
    for (const Wall &w : scene.walls) {
        Surf s;
        s.kind = Surf::wall;
        s.origin = {w.x1, w.y1, 0.0};
        const Vec3 d{w.x2 - w.x1, w.y2 - w.y1, 0.0};
        s.len = d.norm();
        s.udir = d * (1.0 / s.len);
        s.height = w.height;
        s.normal = {s.udir.y, -s.udir.x, 0.0};
        s.material = &registry.get(w.material);
        s.id = &w.id;
        s.scattering = s.material->scattering_coefficient;
        s.pol = Polarization::te; // vertical transmit polarization
        g.surfs.push_back(s);
    }
    for (const Roof &r : scene.roofs) {
        Surf s;
        s.kind = Surf::horizontal;
        s.origin = {r.xmin, r.ymin, r.z};
        s.len = r.xmax - r.xmin;
        s.height = r.ymax - r.ymin;
        s.normal = {0.0, 0.0, 1.0};
        s.material = &registry.get(r.material);
        s.id = &r.id;
        s.scattering = s.material->scattering_coefficient;
        s.pol = Polarization::tm;
        g.surfs.push_back(s);
    }
    {
        static const std::string ground_id = "ground";
        Surf s;
        s.kind = Surf::ground;
        s.normal = {0.0, 0.0, 1.0};
        s.material = &registry.get(scene.ground_material);
        s.id = &ground_id;
        s.scattering = s.material->scattering_coefficient;
        s.pol = Polarization::tm;
        g.surfs.push_back(s);
    }
    return g;
}

// Ray/surface intersection parameter, or +inf when missed.
double intersect(const Surf &s, const Vec3 &p, const Vec3 &d) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (s.kind) {
    case Surf::wall: {
        const double denom = d.dot(s.normal);
        if (std::abs(denom) < 1e-14)
            return inf;
        const double t = (s.origin - p).dot(s.normal) / denom;
        if (t < kHitEps)
            return inf;
        const Vec3 hit = p + t * d;
        if (hit.z < 0.0 || hit.z > s.height)
            return inf;
        const double u = (hit - s.origin).dot(s.udir);
        if (u < 0.0 || u > s.len)
            return inf;
        return t;
    }
    case Surf::horizontal: {
        if (std::abs(d.z) < 1e-14)
            return inf;
        const double t = (s.origin.z - p.z) / d.z;
        if (t < kHitEps)
            return inf;
        const Vec3 hit = p + t * d;
        if (hit.x < s.origin.x || hit.x > s.origin.x + s.len || hit.y < s.origin.y || hit.y > s.origin.y + s.height)
            return inf;
        return t;
    }
    case Surf::ground: {
        if (std::abs(d.z) < 1e-14)
            return inf;
        const double t = -p.z / d.z;
        return t < kHitEps ? inf : t;
    }
    }
    return inf;
}

// Nearest surface along (p, d), excluding index `skip` (last bounce).
int nearest_hit(const Geometry &g, const Vec3 &p, const Vec3 &d, int skip, double &t_out) {
    int best = -1;
    double t_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(g.surfs.size()); ++i) {
        if (i == skip)
            continue;
        const double t = intersect(g.surfs[i], p, d);
        if (t < t_best) {
            t_best = t;
            best = i;
        }
    }
    t_out = t_best;
    return best;
}

// True when any surface (other than skip_a/skip_b) cuts the open segment.
bool occluded(const Geometry &g, const Vec3 &a, const Vec3 &b, int skip_a = -1, int skip_b = -1) {
    const Vec3 d = b - a;
    const double len = d.norm();
    if (len <= 0.0)
        return false;
    const Vec3 dn = d * (1.0 / len);
    for (int i = 0; i < static_cast<int>(g.surfs.size()); ++i) {
        if (i == skip_a || i == skip_b)
            continue;
        const double t = intersect(g.surfs[i], a, dn);
        if (t < len - 1e-7)
            return true;
    }
    return false;
}

Vec3 ray_direction(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t h1 = mix_seed(seed, index, 0x51ULL);
    const std::uint64_t h2 = mix_seed(seed, index, 0x52ULL);
    const double u1 = static_cast<double>(h1 >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    const double cz = 2.0 * u1 - 1.0;
    const double phi = kTwoPi * u2;
    const double s = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    return {s * std::cos(phi), s * std::sin(phi), cz};
}

// ---- per-rx accumulation ----------------------------------------------------

struct ScatterFound {
    double delay;
    cplx amplitude;
    Vec3 departure;
};

struct RxState {
    Vec3 pos;
    std::set<std::vector<std::uint16_t>> spec_traces;
    std::map<std::pair<std::vector<std::uint16_t>, std::uint16_t>, ScatterFound> scatter;
};

void set_departure(Path &p, const Vec3 &dir) {
    p.departure_azimuth = std::atan2(dir.y, dir.x);
    p.departure_elevation = std::atan2(dir.z, std::hypot(dir.x, dir.y));
}

// Exact specular path for a reflection sequence, by successive images.
// Returns false when the sequence has no physical realization for this rx.
// scatter_split applies the Gamma^2(1-S^2) / S^2 energy partition; with the
// scattering model off the full Fresnel energy stays in the specular path.
bool validate_specular(const Geometry &g, const Vec3 &tx, const Vec3 &rx, const std::vector<std::uint16_t> &seq,
                       bool scatter_split, Path &out) {
    const std::size_t k = seq.size();
    std::vector<Vec3> images(k + 1);
    images[0] = tx;
    for (std::size_t j = 0; j < k; ++j) {
        const Surf &s = g.surfs[seq[j]];
        const Vec3 plane_origin = s.kind == Surf::ground ? Vec3{0, 0, 0} : s.origin;
        images[j + 1] = mirror_point(images[j], plane_origin, s.normal);
    }
    std::vector<Vec3> pts(k + 2);
    pts[0] = tx;
    pts[k + 1] = rx;
    for (std::size_t j = k; j >= 1; --j) {
        const Surf &s = g.surfs[seq[j - 1]];
        const Vec3 &a = images[j]; // tx mirrored j times
        const Vec3 &b = pts[j + 1];
        const Vec3 plane_origin = s.kind == Surf::ground ? Vec3{0, 0, 0} : s.origin;
        const double denom = (b - a).dot(s.normal);
        if (std::abs(denom) < 1e-14)
            return false;
        const double t = (plane_origin - a).dot(s.normal) / denom;
        if (t < 1e-9 || t > 1.0 - 1e-9)
            return false;
        const Vec3 p = a + t * (b - a);
        // Point-in-rectangle check per surface kind.
        if (s.kind == Surf::wall) {
            if (p.z < 0.0 || p.z > s.height)
                return false;
            const double u = (p - s.origin).dot(s.udir);
            if (u < 0.0 || u > s.len)
                return false;
        } else if (s.kind == Surf::horizontal) {
            if (p.x < s.origin.x || p.x > s.origin.x + s.len || p.y < s.origin.y || p.y > s.origin.y + s.height)
                return false;
        } // ground: infinite plane, z matched by construction
        pts[j] = p;
    }
    // Leg visibility, excluding the surfaces at each leg's endpoints.
    for (std::size_t j = 0; j + 1 <= k + 1; ++j) {
        const int skip_a = j == 0 ? -1 : seq[j - 1];
        const int skip_b = j == k ? -1 : seq[j];
        if (occluded(g, pts[j], pts[j + 1], skip_a, skip_b))
            return false;
    }
    // Coefficients at the exact specular angles.
    cplx carried(1.0, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j <= k; ++j)
        total += distance(pts[j], pts[j + 1]);
    for (std::size_t j = 1; j <= k; ++j) {
        const Surf &s = g.surfs[seq[j - 1]];
        const Vec3 din = (pts[j] - pts[j - 1]).normalized();
        const double ct = std::min(1.0, std::abs(din.dot(s.normal)));
        const double theta = std::acos(ct);
        const cplx gamma = fresnel_reflection(*s.material, std::min(theta, kPi / 2.0 - 1e-12), g.frequency, s.pol);
        carried *= gamma;
        if (scatter_split)
            carried *= std::sqrt(std::max(0.0, 1.0 - s.scattering * s.scattering));
    }
    const double phase = -kTwoPi * g.frequency * total / kSpeedOfLight;
    out.delay_s = total / kSpeedOfLight;
    out.amplitude = carried * (g.wavelength / (4.0 * kPi)) * (1.0 / total) * std::exp(cplx(0.0, phase));
    out.trace.clear();
    for (std::uint16_t idx : seq)
        out.trace.push_back({InteractionKind::reflection, *g.surfs[idx].id});
    set_departure(out, (pts[1] - tx).normalized());
    return true;
}

// Deterministic single knife-edge diffraction over the edges of every wall
// that blocks the direct segment.
void add_diffraction(const Geometry &g, const Vec3 &tx, const Vec3 &rx, std::vector<Path> &out) {
    const Vec3 span = rx - tx;
    const double d_direct = span.norm();
    const Vec3 dline = span * (1.0 / d_direct);
    for (int wi = 0; wi < static_cast<int>(g.surfs.size()); ++wi) {
        const Surf &s = g.surfs[wi];
        if (s.kind != Surf::wall)
            continue;
        const double t_block = intersect(s, tx, dline);
        if (t_block >= d_direct - 1e-9)
            continue; // this wall does not shadow the link
        const Vec3 top_a = s.origin + Vec3{0, 0, s.height};
        const Vec3 top_b = s.origin + s.len * s.udir + Vec3{0, 0, s.height};
        const Vec3 side_a0 = s.origin, side_a1 = top_a;
        const Vec3 side_b0 = s.origin + s.len * s.udir, side_b1 = top_b;
        const struct {
            Vec3 a, b;
            const char *tag;
        } edges[3] = {{top_a, top_b, "top"}, {side_a0, side_a1, "sideA"}, {side_b0, side_b1, "sideB"}};
        for (const auto &edge : edges) {
            // Shortest tx->edge->rx detour by ternary search (convex in the
            // edge parameter).
            double lo = 0.0, hi = 1.0;
            auto detour = [&](double u) {
                const Vec3 e = edge.a + u * (edge.b - edge.a);
                return distance(tx, e) + distance(e, rx);
            };
            for (int it = 0; it < 80; ++it) {
                const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
                if (detour(m1) <= detour(m2))
                    hi = m2;
                else
                    lo = m1;
            }
            const double u = (lo + hi) / 2.0;
            const Vec3 e = edge.a + u * (edge.b - edge.a);
            const double d1p = (e - tx).dot(dline);
            const double d2p = d_direct - d1p;
            if (d1p <= 1e-6 || d2p <= 1e-6)
                continue; // edge beyond the link endpoints
            const Vec3 foot = tx + d1p * dline;
            const double clearance = distance(e, foot);
            // Fresnel parameter with slant distances terminal -> edge point.
            const double d1 = distance(tx, e), d2 = distance(e, rx);
            const double nu = clearance * std::sqrt(2.0 * (d1 + d2) / (g.wavelength * d1 * d2));
            if (occluded(g, tx, e, -1, wi) || occluded(g, e, rx, wi, -1))
                continue;
            const double total = d1 + d2;
            const cplx f = knife_edge_diffraction(nu);
            Path p;
            p.delay_s = total / kSpeedOfLight;
            const double phase = -kTwoPi * g.frequency * total / kSpeedOfLight;
            p.amplitude = f * (g.wavelength / (4.0 * kPi)) * (1.0 / total) * std::exp(cplx(0.0, phase));
            p.trace.push_back({InteractionKind::diffraction, *s.id + "#" + edge.tag});
            set_departure(p, (e - tx).normalized());
            out.push_back(std::move(p));
        }
    }
}

bool trace_less(const std::vector<Interaction> &a, const std::vector<Interaction> &b) {
    if (a.size() != b.size())
        return a.size() < b.size();
    return a < b;
}

void canonical_sort(std::vector<Path> &paths) {
    std::sort(paths.begin(), paths.end(), [](const Path &x, const Path &y) {
        if (x.delay_s != y.delay_s)
            return x.delay_s < y.delay_s;
        return trace_less(x.trace, y.trace);
    });
}

} // namespace

const char *interaction_kind_name(InteractionKind k) {
    switch (k) {
    case InteractionKind::reflection: return "reflection";
    case InteractionKind::diffraction: return "diffraction";
    case InteractionKind::scatter: return "scatter";
    }
    return "?";
}

double TraceConfig::effective_radius() const {
    if (!auto_radius)
        return reception_radius;
    return reception_radius * std::sqrt(1e4 / static_cast<double>(ray_count));
}

void TraceConfig::validate() const {
    if (ray_count == 0)
        throw dimension_error("trace config: ray_count must be positive");
    if (max_reflections < 0)
        throw dimension_error("trace config: max_reflections must be non-negative");
    if (reception_radius <= 0.0)
        throw dimension_error("trace config: reception radius must be positive");
}

std::vector<PathList> trace_batch(const Scene &scene, const TraceConfig &cfg, const std::vector<Vec3> &rx_positions,
                                  const MaterialRegistry &registry) {
    cfg.validate();
    scene.validate(registry);
    const Geometry g = build_geometry(scene, registry);
    const Vec3 tx = scene.tx;
    const double radius = cfg.effective_radius();

    std::vector<RxState> rxs(rx_positions.size());
    for (std::size_t i = 0; i < rx_positions.size(); ++i)
        rxs[i].pos = rx_positions[i];

    std::vector<std::uint16_t> seq;
    seq.reserve(static_cast<std::size_t>(cfg.max_reflections));

    for (std::uint64_t ri = 0; ri < cfg.ray_count; ++ri) {
        Vec3 pos = tx;
        Vec3 dir = ray_direction(cfg.seed, ri);
        seq.clear();
        cplx carried(1.0, 0.0);
        double travelled = 0.0;
        int last_surface = -1;
        const bool scatter_ray = cfg.enable_scattering && ri < kScatterRayCap;

        for (int bounce = 0;; ++bounce) {
            double t_hit;
            const int hit = nearest_hit(g, pos, dir, last_surface, t_hit);
            const double seg_len = hit >= 0 ? t_hit : kFarDistance;
            const Vec3 seg_end = pos + seg_len * dir;

            // Reception: register the specular candidate when this free
            // segment passes within the capture sphere of an rx.
            for (RxState &rx : rxs) {
                double s_par;
                if (point_segment_distance(rx.pos, pos, seg_end, s_par) <= radius && !seq.empty())
                    rx.spec_traces.insert(seq);
            }

            if (hit < 0 || bounce >= cfg.max_reflections)
                break;
            const Surf &s = g.surfs[hit];
            const double leg = seg_len;
            const Vec3 hit_pt = seg_end;

            if (scatter_ray && s.scattering > 0.0) {
                // Lambertian-style re-radiation toward each visible rx.
                const Vec3 n_in = dir.dot(s.normal) < 0.0 ? s.normal : -s.normal;
                const double d_in = travelled + leg;
                for (RxState &rx : rxs) {
                    const Vec3 to_rx = rx.pos - hit_pt;
                    const double side = to_rx.dot(n_in);
                    if (side <= 0.0)
                        continue; // rx behind the surface
                    const double d_out = to_rx.norm();
                    if (d_out < 1e-9 || occluded(g, hit_pt, rx.pos, hit, -1))
                        continue;
                    const double cos_s = std::min(1.0, side / d_out);
                    const double total = d_in + d_out;
                    const double phase = -kTwoPi * g.frequency * total / kSpeedOfLight;
                    const cplx amp = carried * (s.scattering * std::sqrt(cos_s)) * (g.wavelength / (4.0 * kPi)) *
                                     (1.0 / total) * std::exp(cplx(0.0, phase));
                    auto key = std::make_pair(seq, static_cast<std::uint16_t>(hit));
                    auto it = rx.scatter.find(key);
                    if (it == rx.scatter.end() || std::abs(amp) > std::abs(it->second.amplitude)) {
                        ScatterFound found{total / kSpeedOfLight, amp, ray_direction(cfg.seed, ri)};
                        rx.scatter.insert_or_assign(std::move(key), found);
                    }
                }
            }

            // Specular continuation.
            const double ct = std::min(1.0, std::abs(dir.dot(s.normal)));
            const double theta = std::acos(ct);
            const cplx gamma =
                fresnel_reflection(*s.material, std::min(theta, kPi / 2.0 - 1e-12), g.frequency, s.pol);
            carried *= gamma * std::sqrt(std::max(0.0, 1.0 - s.scattering * s.scattering));
            travelled += leg;
            seq.push_back(static_cast<std::uint16_t>(hit));
            pos = hit_pt;
            dir = reflect_dir(dir, s.normal);
            last_surface = hit;
        }
    }

    // Deterministic assembly per rx: exact LoS, validated/snapped specular
    // sequences, deterministic knife-edge diffraction, strongest scatter
    // sample per (prefix, surface) key.
    std::vector<PathList> out(rx_positions.size());
    for (std::size_t i = 0; i < rxs.size(); ++i) {
        std::vector<Path> &paths = out[i].paths;
        const Vec3 rx = rxs[i].pos;
        if (!occluded(g, tx, rx)) {
            Path los;
            const double d = distance(tx, rx);
            los.delay_s = d / kSpeedOfLight;
            const double phase = -kTwoPi * g.frequency * d / kSpeedOfLight;
            los.amplitude = (g.wavelength / (4.0 * kPi)) * (1.0 / d) * std::exp(cplx(0.0, phase));
            set_departure(los, (rx - tx).normalized());
            paths.push_back(std::move(los));
        }
        for (const auto &sq : rxs[i].spec_traces) {
            Path p;
            if (validate_specular(g, tx, rx, sq, cfg.enable_scattering, p))
                paths.push_back(std::move(p));
        }
        if (cfg.enable_diffraction)
            add_diffraction(g, tx, rx, paths);
        for (const auto &[key, found] : rxs[i].scatter) {
            Path p;
            p.delay_s = found.delay;
            p.amplitude = found.amplitude;
            for (std::uint16_t idx : key.first)
                p.trace.push_back({InteractionKind::reflection, *g.surfs[idx].id});
            p.trace.push_back({InteractionKind::scatter, *g.surfs[key.second].id});
            set_departure(p, found.departure);
            paths.push_back(std::move(p));
        }
        canonical_sort(paths);
    }
    return out;
}

PathList trace(const Scene &scene, const TraceConfig &cfg, const MaterialRegistry &registry) {
    return trace_batch(scene, cfg, {scene.rx}, registry).front();
}

CirResult paths_to_cir(const PathList &paths, const ArrayConfig &array, double sample_rate,
                       std::size_t max_taps, std::optional<double> reference_delay) {
    if (max_taps == 0)
        throw dimension_error("paths_to_cir: need at least one tap");
    if (array.antenna_count == 0)
        throw dimension_error("paths_to_cir: need at least one antenna");
    CirResult result;
    result.cir.taps.assign(array.antenna_count, std::vector<cplx>(max_taps, cplx(0.0, 0.0)));
    if (paths.paths.empty())
        return result;

    double ref = reference_delay.value_or(std::numeric_limits<double>::infinity());
    if (!reference_delay) {
        for (const Path &p : paths.paths)
            ref = std::min(ref, p.delay_s);
    }
    const Vec3 axis = array.axis.normalized();
    double kept = 0.0, dropped = 0.0;
    for (const Path &p : paths.paths) {
        const long bin = std::lround((p.delay_s - ref) * sample_rate);
        const double energy = std::norm(p.amplitude);
        if (bin < 0 || bin >= static_cast<long>(max_taps)) {
            dropped += energy;
            continue;
        }
        kept += energy;
        const double cel = std::cos(p.departure_elevation);
        const Vec3 dirv{cel * std::cos(p.departure_azimuth), cel * std::sin(p.departure_azimuth),
                        std::sin(p.departure_elevation)};
        const double step = kTwoPi * array.spacing_wavelengths * axis.dot(dirv);
        for (std::size_t t = 0; t < array.antenna_count; ++t) {
            const double phi = step * static_cast<double>(t);
            result.cir.taps[t][static_cast<std::size_t>(bin)] += p.amplitude * std::exp(cplx(0.0, phi));
        }
    }
    const double total = kept + dropped;
    result.dropped_energy_fraction = total > 0.0 ? dropped / total : 0.0;
    return result;
}

} // namespace ctwin::rt
