#pragma once

#include <array>
#include <cmath>

namespace emfp {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(Vec3 a, double s) { return a *= 1.0 / s; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double norm2(const Vec3& a) { return dot(a, a); }

inline Vec3 normalized(const Vec3& a) {
    double n = norm(a);
    return n > 0.0 ? a / n : Vec3{0, 0, 0};
}

/// Symmetric 3x3 tensor (stress, strain). Components xx, yy, zz, xy, yz, zx.
struct Sym3 {
    double xx = 0, yy = 0, zz = 0, xy = 0, yz = 0, zx = 0;

    constexpr Sym3& operator+=(const Sym3& o) {
        xx += o.xx; yy += o.yy; zz += o.zz; xy += o.xy; yz += o.yz; zx += o.zx;
        return *this;
    }
    constexpr Sym3& operator-=(const Sym3& o) {
        xx -= o.xx; yy -= o.yy; zz -= o.zz; xy -= o.xy; yz -= o.yz; zx -= o.zx;
        return *this;
    }
    constexpr Sym3& operator*=(double s) {
        xx *= s; yy *= s; zz *= s; xy *= s; yz *= s; zx *= s;
        return *this;
    }
    constexpr double trace() const { return xx + yy + zz; }
};

constexpr Sym3 operator+(Sym3 a, const Sym3& b) { return a += b; }
constexpr Sym3 operator-(Sym3 a, const Sym3& b) { return a -= b; }
constexpr Sym3 operator*(Sym3 a, double s) { return a *= s; }
constexpr Sym3 operator*(double s, Sym3 a) { return a *= s; }

/// Full contraction a:b (accounts for off-diagonal multiplicity).
constexpr double ddot(const Sym3& a, const Sym3& b) {
    return a.xx * b.xx + a.yy * b.yy + a.zz * b.zz +
           2.0 * (a.xy * b.xy + a.yz * b.yz + a.zx * b.zx);
}

constexpr Sym3 deviator(const Sym3& a) {
    double p = a.trace() / 3.0;
    Sym3 d = a;
    d.xx -= p; d.yy -= p; d.zz -= p;
    return d;
}

inline double von_mises(const Sym3& a) {
    Sym3 s = deviator(a);
    return std::sqrt(1.5 * ddot(s, s));
}

/// 3x3 matrix, row-major. Used for velocity gradients and Jacobians.
struct Mat3 {
    std::array<double, 9> m{};

    constexpr double& operator()(int r, int c) { return m[3 * r + c]; }
    constexpr double operator()(int r, int c) const { return m[3 * r + c]; }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    Mat3 inverse() const {
        double d = det();
        Mat3 inv;
        double id = 1.0 / d;
        inv.m[0] = (m[4] * m[8] - m[5] * m[7]) * id;
        inv.m[1] = (m[2] * m[7] - m[1] * m[8]) * id;
        inv.m[2] = (m[1] * m[5] - m[2] * m[4]) * id;
        inv.m[3] = (m[5] * m[6] - m[3] * m[8]) * id;
        inv.m[4] = (m[0] * m[8] - m[2] * m[6]) * id;
        inv.m[5] = (m[2] * m[3] - m[0] * m[5]) * id;
        inv.m[6] = (m[3] * m[7] - m[4] * m[6]) * id;
        inv.m[7] = (m[1] * m[6] - m[0] * m[7]) * id;
        inv.m[8] = (m[0] * m[4] - m[1] * m[3]) * id;
        return inv;
    }
};

constexpr Sym3 sym_part(const Mat3& L) {
    Sym3 s;
    s.xx = L(0, 0); s.yy = L(1, 1); s.zz = L(2, 2);
    s.xy = 0.5 * (L(0, 1) + L(1, 0));
    s.yz = 0.5 * (L(1, 2) + L(2, 1));
    s.zx = 0.5 * (L(2, 0) + L(0, 2));
    return s;
}

/// Jaumann increment dW*sigma - sigma*dW for spin increment dW = skew(L)*dt,
/// passed as the vector (w_xy, w_yz, w_zx) with w_ij = 0.5*(L_ij - L_ji)*dt.
inline Sym3 jaumann_increment(const Sym3& s, double wxy, double wyz, double wzx) {
    // W = [[0, wxy, -wzx], [-wxy, 0, wyz], [wzx, -wyz, 0]]
    Sym3 r;
    r.xx = 2.0 * (wxy * s.xy - wzx * s.zx);
    r.yy = 2.0 * (wyz * s.yz - wxy * s.xy);
    r.zz = 2.0 * (wzx * s.zx - wyz * s.yz);
    r.xy = wxy * (s.yy - s.xx) + wyz * s.zx - wzx * s.yz;
    r.yz = wyz * (s.zz - s.yy) + wzx * s.xy - wxy * s.zx;
    r.zx = wzx * (s.xx - s.zz) + wxy * s.yz - wyz * s.xy;
    return r;
}

} // namespace emfp
