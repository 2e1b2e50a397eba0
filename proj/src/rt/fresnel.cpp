#include "ctwin/rt/fresnel.hpp"

#include <cmath>

namespace ctwin::rt {

cplx fresnel_reflection(const Material &material, double incidence_angle, double frequency_hz, Polarization pol) {
    if (incidence_angle < 0.0 || incidence_angle >= kPi / 2.0)
        throw dimension_error("fresnel_reflection: incidence angle must lie in [0, pi/2)");
    if (material.is_perfect_conductor)
        return pol == Polarization::te ? cplx(-1.0, 0.0) : cplx(1.0, 0.0);
    const cplx eps = material.complex_permittivity(frequency_hz);
    const double ct = std::cos(incidence_angle);
    const double st = std::sin(incidence_angle);
    const cplx root = std::sqrt(eps - st * st);
    if (pol == Polarization::te)
        return (ct - root) / (ct + root);
    return (root - eps * ct) / (root + eps * ct);
}

void fresnel_integrals(double x, double &c_out, double &s_out) {
    // Mielenz, "Computation of Fresnel Integrals II", J. Res. NIST 105 (2000).
    static const double cn[12] = {
        1.0,
        -0.24674011002723,
        0.02818550087789,
        -0.00160488313564,
        5.407413381408390e-05,
        -1.200097255860028e-06,
        1.884349911527268e-08,
        -2.202276925445466e-10,
        1.989685792418021e-12,
        -1.430918973171519e-14,
        8.384729705118549e-17,
        -4.079981449233875e-19,
    };
    static const double sn[12] = {
        0.52359877559830,
        -0.09228058535804,
        0.00724478420420,
        -3.121169423545791e-04,
        8.444272883545251e-06,
        -1.564714450092211e-07,
        2.108212193321454e-09,
        -2.157430680584343e-11,
        1.733410208887483e-13,
        -1.122324478798395e-15,
        5.980053239210401e-18,
        -2.667871362841397e-20,
    };
    static const double fn[12] = {
        0.318309844,  9.34626e-8,  -0.09676631,  0.000606222, 0.325539361,  0.325206461,
        -7.450551455, 32.20380908, -78.8035274,  118.5343352, -102.4339798, 39.06207702,
    };
    static const double gn[12] = {
        0.0,          0.101321519, -4.07292e-5,  -0.152068115, -0.046292605, 1.622793598,
        -5.199186089, 7.477942354, -0.695291507, -15.10996796, 22.28401942,  -10.89968491,
    };

    const double ax = std::abs(x);
    double c, s;
    if (ax <= 1.6) {
        // Power series in x^4: C = x * sum cn[n] x^{4n}, S = x^3 * sum sn[n] x^{4n}.
        const double x4 = ax * ax * ax * ax;
        double pc = 0.0, ps = 0.0;
        for (int n = 11; n >= 0; --n) {
            pc = pc * x4 + cn[n];
            ps = ps * x4 + sn[n];
        }
        c = ax * pc;
        s = ax * ax * ax * ps;
    } else {
        // Auxiliary functions f, g as inverse-odd-power series.
        const double inv = 1.0 / ax;
        const double inv2 = inv * inv;
        double f = 0.0, g = 0.0;
        double p = inv;
        for (int n = 0; n < 12; ++n) {
            f += fn[n] * p;
            g += gn[n] * p;
            p *= inv2;
        }
        const double arg = kPi / 2.0 * ax * ax;
        const double sa = std::sin(arg), ca = std::cos(arg);
        c = 0.5 + f * sa - g * ca;
        s = 0.5 - g * sa - f * ca;
    }
    if (x < 0.0) {
        c = -c;
        s = -s;
    }
    c_out = c;
    s_out = s;
}

cplx knife_edge_diffraction(double fresnel_parameter) {
    if (!std::isfinite(fresnel_parameter))
        throw numeric_error("knife_edge_diffraction: non-finite Fresnel parameter");
    double c, s;
    fresnel_integrals(fresnel_parameter, c, s);
    const cplx half_minus(0.5 - c, -(0.5 - s));
    return cplx(0.5, 0.5) * half_minus;
}

} // namespace ctwin::rt
