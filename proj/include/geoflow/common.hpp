// geoflow - shared basics: errors, disk points, SU(1,1) isometries, packed words
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoflow {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kBoundaryGuard = 1e-12;  // points with |z| >= 1 - guard are rejected

// Error categories map to CLI exit codes (3 = config, 4 = solver, 2 = assertion).
enum class ErrorKind { config, solver, resource, assertion };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& m) { return Error(ErrorKind::config, m); }
inline Error solver_error(const std::string& m) { return Error(ErrorKind::solver, m); }
inline Error resource_error(const std::string& m) { return Error(ErrorKind::resource, m); }

//--------------------------------------------------------------------------------------

// A point of the open unit disk (universal cover in the Poincare model).
struct DiskPoint {
  cplx z{0.0, 0.0};
};

inline DiskPoint disk_point(cplx z) {
  if (!(std::abs(z) < 1.0 - kBoundaryGuard))
    throw solver_error("boundary proximity: |z| = " + std::to_string(std::abs(z)));
  return DiskPoint{z};
}

inline DiskPoint disk_point(double x, double y) { return disk_point(cplx(x, y)); }

//--------------------------------------------------------------------------------------

// Unit-determinant disk isometry [[a, b], [conj(b), conj(a)]], |a|^2 - |b|^2 = 1.
// The form is closed under products and inverses, so only (a, b) is stored.
// Entries grow like e^{d/2} where d is the translation distance, which keeps deep
// deck transformations representable long after raw disk coordinates underflow.
struct Mobius {
  cplx a{1.0, 0.0};
  cplx b{0.0, 0.0};

  Mobius operator*(const Mobius& o) const {
    return Mobius{a * o.a + b * std::conj(o.b), a * o.b + b * std::conj(o.a)};
  }
  Mobius inverse() const { return Mobius{std::conj(a), -b}; }
  bool is_identity(double tol = 1e-10) const {
    return std::abs(a - 1.0) < tol && std::abs(b) < tol;
  }
  // Projective sign convention: Re(a) > 0 (trace of a hyperbolic element never vanishes).
  Mobius canonical_sign() const {
    if (a.real() < 0 || (a.real() == 0 && a.imag() < 0)) return Mobius{-a, -b};
    return *this;
  }
  double det_deviation() const { return std::abs(std::norm(a) - std::norm(b) - 1.0); }

  cplx apply(cplx z) const { return (a * z + b) / (std::conj(b) * z + std::conj(a)); }

  // Action on the circle: angle of the image of e^{i theta}, computed without
  // forming near-unit moduli.
  double boundary_angle(double theta) const {
    cplx u = std::polar(1.0, theta);
    cplx num = a * u + b;
    cplx den = std::conj(b) * u + std::conj(a);
    return std::arg(num) - std::arg(den);
  }

  // Derivative angle: a tangent direction phi at z maps to phi + dtheta(z).
  double direction_shift(cplx z) const {
    return -2.0 * std::arg(std::conj(b) * z + std::conj(a));
  }

  double trace_magnitude() const { return 2.0 * std::abs(a.real()); }

  // Translation length of a hyperbolic element: 2 arccosh(|tr|/2); 0 if |tr| <= 2.
  double translation_length() const {
    double t = std::abs(a.real());
    return t <= 1.0 ? 0.0 : 2.0 * std::acosh(t);
  }

  // d0(0, m(0)) = 2 arccosh |a|.
  double displacement() const {
    double m = std::abs(a);
    return m <= 1.0 ? 0.0 : 2.0 * std::acosh(m);
  }
};

//--------------------------------------------------------------------------------------
// Hyperbolic (curvature -1) closed forms on the disk.  These are the background-metric
// primitives; the perturbed metric is handled numerically in metric.cpp.

// d0(p, q) in a cancellation-safe form: cosh^2(d/2) = |1 - conj(p) q|^2 / ((1-|p|^2)(1-|q|^2)).
inline double dist0(cplx p, cplx q) {
  double n2 = std::norm(1.0 - std::conj(p) * q);
  double dp = 1.0 - std::norm(p);
  double dq = 1.0 - std::norm(q);
  double c2 = n2 / (dp * dq);
  if (c2 <= 1.0) return 0.0;
  return 2.0 * std::acosh(std::sqrt(c2));
}

inline double dist0(DiskPoint p, DiskPoint q) { return dist0(p.z, q.z); }

// d0(p, M q) without forming M q, stable for arbitrarily deep images.
inline double dist0_framed(cplx p, const Mobius& m, cplx q) {
  cplx den = std::conj(m.b) * q + std::conj(m.a);
  cplx num = m.a * q + m.b;
  cplx top = den - std::conj(p) * num;  // (1 - conj(p) Mq) * den
  double c2 = std::norm(top) / ((1.0 - std::norm(p)) * (1.0 - std::norm(q)));
  if (c2 <= 1.0) return 0.0;
  return 2.0 * std::acosh(std::sqrt(c2));
}

// Busemann function of the background metric, based at boundary angle xi and
// normalized at the origin: b(z) = -log[(1-|z|^2)/|e^{i xi} - z|^2].
inline double busemann0(double xi, cplx z) {
  cplx u = std::polar(1.0, xi);
  return -std::log1p(-std::norm(z)) + std::log(std::norm(u - z));
}

// Busemann value at M z, same normalization, stable for deep frames:
// 1-|Mz|^2 = (1-|z|^2)/|den|^2 and |u - Mz|^2 = |u den - num|^2/|den|^2.
inline double busemann0_framed(double xi, const Mobius& m, cplx z) {
  cplx u = std::polar(1.0, xi);
  cplx den = std::conj(m.b) * z + std::conj(m.a);
  cplx num = m.a * z + m.b;
  return -std::log1p(-std::norm(z)) + std::log(std::norm(u * den - num));
}

// Endpoints at infinity of the background geodesic through z with Euclidean
// direction angle theta: returns {backward, forward} boundary angles.
inline std::pair<double, double> geodesic_endpoints0(cplx z, double theta) {
  // Send z to 0 by T(w) = (w - z)/(1 - conj(z) w); direction at 0 turns by
  // arg(T'(z)) = arg(1/(1-|z|^2)) = 0 shift on modulus, but T'(z) = 1/(1 - |z|^2) is
  // real positive, so the direction angle is unchanged... careful: T'(w) =
  // (1-|z|^2)/(1-conj(z) w)^2, at w=z: 1/(1-|z|^2) > 0.  Endpoints of the line through 0
  // at angle theta are e^{i theta}, -e^{i theta}; pull back by T^{-1}(w) = (w+z)/(1+conj(z)w).
  cplx f = std::polar(1.0, theta);
  cplx fwd = (f + z) / (1.0 + std::conj(z) * f);
  cplx bwd = (-f + z) / (1.0 - std::conj(z) * f);
  return {std::arg(bwd), std::arg(fwd)};
}

// Unit tangent direction (Euclidean angle) at p of the background geodesic toward
// boundary angle xi.
inline double direction_to_boundary0(cplx p, double xi) {
  // Inverse of the endpoint map: move p to 0, endpoint transforms under T(w), take arg.
  cplx u = std::polar(1.0, xi);
  cplx e = (u - p) / (1.0 - std::conj(p) * u);  // |e| = 1 up to rounding
  return std::arg(e);
}

// Direction at p toward interior point q (background metric).
inline double direction_to_point0(cplx p, cplx q) {
  cplx e = (q - p) / (1.0 - std::conj(p) * q);
  return std::arg(e);
}

// Advance the background geodesic from (z, theta) by arclength t (closed form).
inline void flow0(cplx& z, double& theta, double t) {
  // In the frame where z = 0 and direction 0: point goes to tanh(t/2).
  cplx f = std::polar(1.0, theta);
  double r = std::tanh(0.5 * t);
  cplx w = r * f;
  cplx z2 = (w + z) / (1.0 + std::conj(z) * w);
  // Direction transport: T^{-1}(w) = (w+z)/(1+conj(z)w), derivative (1-|z|^2)/(1+conj(z)w)^2.
  double dtheta = std::arg((1.0 - std::norm(z)) / std::pow(1.0 + std::conj(z) * w, 2));
  theta = theta + dtheta;
  z = z2;
}

// Point of the background geodesic joining boundary angles xi (backward) and eta
// (forward) closest to the origin, plus the direction there (toward eta).
inline void geodesic_between0(double xi_back, double eta_fwd, cplx& z, double& theta) {
  cplx u = std::polar(1.0, xi_back);
  cplx v = std::polar(1.0, eta_fwd);
  // Euclidean chord midpoint scaled onto the geodesic: the geodesic with endpoints u,v
  // is the circular arc orthogonal to the unit circle; its closest point to 0 lies on
  // the bisector direction (u+v)/|u+v| at Euclidean radius (1 - sin(delta))/cos(delta)
  // where 2*delta is the angular gap... derive via half-angle: let 2a = angle between
  // u and v. Closest point radius r0 = (1 - sin a)/cos a = tan(pi/4 - a/2).
  double au = std::arg(u), av = std::arg(v);
  double gap = std::remainder(av - au, 2.0 * kPi);  // signed angle from u to v
  double a = 0.5 * std::abs(gap);
  cplx mid = u + v;
  if (std::abs(mid) < 1e-14) {
    // diametrically opposite: geodesic through origin
    z = 0.0;
    theta = std::arg(v);
    return;
  }
  double r0 = std::tan(0.25 * kPi - 0.5 * a);
  z = r0 * mid / std::abs(mid);
  theta = direction_to_boundary0(z, av);
}

//--------------------------------------------------------------------------------------

// Reduced word over the 8 Bolza generator letters, packed 3 bits per letter.
// Letter k+4 (mod 8) is the inverse of letter k.
struct Word {
  uint64_t bits = 0;
  uint8_t len = 0;

  static constexpr int kMaxLen = 21;
  static inline int inverse_letter(int k) { return (k + 4) & 7; }

  int letter(int i) const { return int((bits >> (3 * i)) & 7u); }
  int last() const { return letter(len - 1); }
  bool empty() const { return len == 0; }

  Word append(int k) const {
    Word w = *this;
    if (w.len >= kMaxLen) throw resource_error("word length cap exceeded");
    w.bits |= (uint64_t(k) << (3 * w.len));
    w.len++;
    return w;
  }
  bool can_append_reduced(int k) const { return empty() || last() != inverse_letter(k); }

  Word inverse() const {
    Word w;
    for (int i = len - 1; i >= 0; --i) w = w.append(inverse_letter(letter(i)));
    return w;
  }
  bool operator==(const Word& o) const { return len == o.len && bits == o.bits; }
  bool operator<(const Word& o) const {
    return len != o.len ? len < o.len : bits < o.bits;
  }
  std::string str() const {
    static const char* names[8] = {"a", "b", "c", "d", "A", "B", "C", "D"};
    std::string s;
    for (int i = 0; i < len; ++i) s += names[letter(i)];
    return s.empty() ? "e" : s;
  }
  std::vector<int> letters() const {
    std::vector<int> v(len);
    for (int i = 0; i < len; ++i) v[i] = letter(i);
    return v;
  }
  static Word from_letters(const std::vector<int>& v) {
    Word w;
    for (int k : v) w = w.append(k);
    return w;
  }
};

//--------------------------------------------------------------------------------------

// Deck word of unbounded length, stored as letters with free reduction on append.
// Used as the coordinate frame for deep objects: a framed point is deck * z_loc with
// z_loc shallow.  Matrices are only ever built from *relative* words (prefix-cancelled),
// which keeps entry magnitudes small; composing raw matrices through large intermediate
// magnitudes freezes an absolute determinant error of order |a|^2 * eps and silently
// corrupts every hyperbolic formula afterwards.
struct Deck {
  std::vector<uint8_t> ls;

  bool empty() const { return ls.empty(); }
  size_t size() const { return ls.size(); }

  void push(int k) {
    if (!ls.empty() && ls.back() == Word::inverse_letter(k))
      ls.pop_back();
    else
      ls.push_back(uint8_t(k));
  }
  Deck then(const Deck& o) const {  // this followed by o (this * o as maps)
    Deck d = *this;
    for (uint8_t k : o.ls) d.push(k);
    return d;
  }
  Deck inverse() const {
    Deck d;
    d.ls.reserve(ls.size());
    for (auto it = ls.rbegin(); it != ls.rend(); ++it)
      d.ls.push_back(uint8_t(Word::inverse_letter(*it)));
    return d;
  }
  // this^{-1} * o with the common prefix cancelled exactly.
  Deck relative_to(const Deck& o) const {
    size_t p = 0;
    while (p < ls.size() && p < o.ls.size() && ls[p] == o.ls[p]) ++p;
    Deck d;
    for (size_t i = ls.size(); i > p; --i)
      d.ls.push_back(uint8_t(Word::inverse_letter(ls[i - 1])));
    for (size_t i = p; i < o.ls.size(); ++i) d.push(o.ls[i]);
    return d;
  }
  bool operator==(const Deck& o) const { return ls == o.ls; }
};

// Point given as frame * z with z shallow; the frame is a deck word.
struct FramedPoint {
  Deck frame;
  cplx z{0.0, 0.0};
};

// Unit tangent vector in framed local coordinates: base point frame * z, direction
// angle theta measured in the local chart (Euclidean angle of the velocity).
struct FramedVector {
  Deck frame;
  cplx z{0.0, 0.0};
  double theta = 0.0;
};

}  // namespace geoflow
