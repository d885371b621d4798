#include "mtlab/moser.hpp"

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mtlab {

namespace {

constexpr double kPi = std::numbers::pi;

// Radial piece of the profile and of the inner zone: L(r) = log(1 + pi r^2 / (2 eps^2)).
double bubble_log(double r, double eps) { return std::log1p(0.5 * kPi * r * r / (eps * eps)); }

/// Integral of f(r) over [lo, hi] on panels growing geometrically from `scale`:
/// [lo, scale] in one panel, then ratio-2 panels. Suited to integrands whose
/// structure lives at r ~ scale.
template <class F>
double radial_integral(F&& f, double lo, double hi, double scale, std::size_t order = 30) {
    double sum = 0.0;
    double x = lo;
    double next = std::max(scale, lo);
    if (next <= lo) next = 2.0 * lo;
    while (x < hi) {
        double y = std::min(next, hi);
        if (y > x) sum += composite_gauss(f, x, y, 1, order);
        x = y;
        next = 2.0 * x;
    }
    return sum;
}

/// Gauss points mapped to [0, 1].
struct UnitRule {
    std::vector<double> x, w;
};
UnitRule unit_rule(std::size_t n) {
    const GaussRule& g = gauss_legendre(n);
    UnitRule r;
    for (std::size_t i = 0; i < n; ++i) {
        r.x.push_back(0.5 * (g.x[i] + 1.0));
        r.w.push_back(0.5 * g.w[i]);
    }
    return r;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }
double smoothstep_d(double t) { return 6.0 * t * (1.0 - t); }

/// Per-triangle linear data of the regular part, plus the fan of p in the
/// half-disk frame (theta measured counter-clockwise from the boundary tangent).
struct Context {
    const MoserTestFunction& tf;
    const Mesh& mesh;
    Point e0, e1;  // tangent, inward normal
    std::vector<Point> grad_B;
    std::vector<double> B_at_0;  // B_h at vertex 0 of each triangle
    struct Sector {
        std::size_t t;
        double th0, th1;
    };
    std::vector<Sector> fan;  // sorted by th0
    std::vector<char> in_fan;
    std::vector<double> breaks;  // angular breakpoints in [0, pi]

    explicit Context(const MoserTestFunction& f) : tf(f), mesh(*f.mesh) {
        e1 = f.normal;
        e0 = {e1.y, -e1.x};
        const std::size_t nt = mesh.num_triangles();
        grad_B.resize(nt);
        B_at_0.resize(nt);
        in_fan.assign(nt, 0);
        for (std::size_t t = 0; t < nt; ++t) {
            const Triangle& T = mesh.triangles[t];
            Point x0 = mesh.nodes[T[0]], x1 = mesh.nodes[T[1]], x2 = mesh.nodes[T[2]];
            double b0 = f.B[T[0]], b1 = f.B[T[1]], b2 = f.B[T[2]];
            double det = cross(x1 - x0, x2 - x0);
            Point d1 = x1 - x0, d2 = x2 - x0;
            // grad . d1 = b1 - b0, grad . d2 = b2 - b0
            grad_B[t] = {((b1 - b0) * d2.y - (b2 - b0) * d1.y) / det, ((b2 - b0) * d1.x - (b1 - b0) * d2.x) / det};
            B_at_0[t] = b0;
            for (int k = 0; k < 3; ++k) {
                if (T[k] != f.p_node) continue;
                in_fan[t] = 1;
                Point q1 = mesh.nodes[T[(k + 1) % 3]] - f.p, q2 = mesh.nodes[T[(k + 2) % 3]] - f.p;
                fan.push_back({t, angle(q1), angle(q2)});
            }
        }
        std::sort(fan.begin(), fan.end(), [](const Sector& s, const Sector& u) { return s.th0 < u.th0; });
        breaks.push_back(0.0);
        for (const Sector& s : fan) {
            for (double th : {s.th0, s.th1})
                if (th > 0.0 && th < kPi) breaks.push_back(th);
        }
        breaks.push_back(kPi);
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end(),
                                 [](double u, double v) { return std::abs(u - v) < 1e-14; }),
                     breaks.end());
    }

    double angle(Point v) const { return std::atan2(dot(v, e1), dot(v, e0)); }
    Point direction(double th) const { return std::cos(th) * e0 + std::sin(th) * e1; }

    /// Fan triangle covering direction th; directions outside the fan use the nearest sector.
    std::size_t sector(double th) const {
        for (const Sector& s : fan)
            if (th >= s.th0 && th <= s.th1) return s.t;
        return th < fan.front().th0 ? fan.front().t : fan.back().t;
    }

    double B_h(std::size_t t, Point x) const { return B_at_0[t] + dot(grad_B[t], x - mesh.nodes[mesh.triangles[t][0]]); }

    double W_inner(double r) const { return -bubble_log(r, tf.eps) / (2.0 * kPi) + K0(); }
    double K0() const {
        return std::log1p(0.5 * kPi * tf.R * tf.R) / (2.0 * kPi) - std::log(tf.a) / kPi + tf.A_model;
    }
    double grad2_inner(double r) const {
        double g = r / (2.0 * tf.eps * tf.eps + kPi * r * r);
        return g * g;
    }

    /// W and |grad W|^2 at x = p + r dir(th), a <= r <= b, using sector t.
    std::pair<double, double> mid(std::size_t t, double r, Point dir) const {
        Point x = tf.p + r * dir;
        double tt = (r - tf.a) / tf.a;
        double eta = 1.0 - smoothstep(tt), deta = -smoothstep_d(tt) / tf.a;
        double beta = B_h(t, x) - tf.A_p;
        double W = -std::log(r) / kPi + tf.A_model + (1.0 - eta) * beta;
        Point g = (-1.0 / (kPi * r) - deta * beta) * dir + (1.0 - eta) * grad_B[t];
        return {W, dot(g, g)};
    }

    /// Green model S + B_h - delta and its squared gradient at x in triangle t.
    std::pair<double, double> far(std::size_t t, Point x) const {
        Point d = x - tf.p;
        double r2 = dot(d, d);
        double W = -0.5 * std::log(r2) / kPi + B_h(t, x) - tf.delta;
        Point g = (-1.0 / (kPi * r2)) * d + grad_B[t];
        return {W, dot(g, g)};
    }
};

double point_triangle_distance(Point x, Point a, Point b, Point c) {
    auto seg = [&](Point u, Point v) {
        Point d = v - u;
        double t = std::clamp(dot(x - u, d) / dot(d, d), 0.0, 1.0);
        return norm(x - (u + t * d));
    };
    double s1 = cross(b - a, x - a), s2 = cross(c - b, x - b), s3 = cross(a - c, x - c);
    if ((s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0)) return 0.0;
    return std::min({seg(a, b), seg(b, c), seg(c, a)});
}

/// Integrates g(W, |grad W|^2) -> array<K> of the Green model over {x in Omega : |x - p| >= rmin}.
/// Fan triangles are integrated in polar coordinates about p (log-r panels);
/// the rest by a collapsed 5x5 Gauss rule, subdivided near p and across |x - p| = rmin.
template <std::size_t K, class G>
std::array<double, K> integrate_far(const Context& ctx, double rmin, G&& g) {
    const Mesh& mesh = ctx.mesh;
    const Point p = ctx.tf.p;
    const std::size_t nt = mesh.num_triangles();
    std::vector<std::array<double, K>> per(nt);
    static const UnitRule th_rule = unit_rule(24), r_rule = unit_rule(12), c_rule = unit_rule(5);

    auto fan_triangle = [&](std::size_t t) {
        std::array<double, K> acc{};
        const Triangle& T = mesh.triangles[t];
        int k = 0;
        while (T[k] != ctx.tf.p_node) ++k;
        Point q1 = mesh.nodes[T[(k + 1) % 3]] - p, q2 = mesh.nodes[T[(k + 2) % 3]] - p;
        double th0 = std::atan2(q1.y, q1.x), th1 = std::atan2(q2.y, q2.x);
        if (th1 < th0) th1 += 2.0 * kPi;
        Point e = q2 - q1;
        double num = cross(q1, e);
        for (std::size_t i = 0; i < th_rule.x.size(); ++i) {
            double th = th0 + (th1 - th0) * th_rule.x[i];
            Point dir{std::cos(th), std::sin(th)};
            double rmax = num / cross(dir, e);
            double lo = rmin > 0.0 ? rmin : 1e-12 * rmax;
            if (rmax <= lo) continue;
            double span = std::log(rmax / lo);
            auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(span / std::log(2.0))));
            double hs = span / static_cast<double>(panels);
            double wth = (th1 - th0) * th_rule.w[i];
            for (std::size_t pnl = 0; pnl < panels; ++pnl) {
                for (std::size_t j = 0; j < r_rule.x.size(); ++j) {
                    double s = std::log(lo) + hs * (static_cast<double>(pnl) + r_rule.x[j]);
                    double r = std::exp(s);
                    auto [W, g2] = ctx.far(t, p + r * dir);
                    auto v = g(W, g2);
                    double w = wth * hs * r_rule.w[j] * r * r;
                    for (std::size_t q = 0; q < K; ++q) acc[q] += w * v[q];
                }
            }
        }
        return acc;
    };

    auto rule_on = [&](std::size_t t, Point a, Point b, Point c, bool clip, std::array<double, K>& acc) {
        double area2 = std::abs(cross(b - a, c - a));
        for (std::size_t i = 0; i < c_rule.x.size(); ++i) {
            for (std::size_t j = 0; j < c_rule.x.size(); ++j) {
                double u = c_rule.x[i], v = u * c_rule.x[j];
                Point x = a + u * (b - a) + v * (c - b);
                if (clip && norm(x - p) < rmin) continue;
                auto [W, g2] = ctx.far(t, x);
                auto val = g(W, g2);
                double w = area2 * c_rule.w[i] * c_rule.w[j] * u;
                for (std::size_t q = 0; q < K; ++q) acc[q] += w * val[q];
            }
        }
    };

    auto recurse = [&](auto&& self, std::size_t t, Point a, Point b, Point c, int depth, std::array<double, K>& acc) -> void {
        if (rmin > 0.0 && norm(a - p) <= rmin && norm(b - p) <= rmin && norm(c - p) <= rmin) return;
        double dist = point_triangle_distance(p, a, b, c);
        double diam = std::max({norm(b - a), norm(c - b), norm(a - c)});
        bool crossing = rmin > 0.0 && dist < rmin;
        bool near = diam > 0.25 * dist;
        if ((crossing || near) && depth < 14) {
            Point ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
            self(self, t, a, ab, ca, depth + 1, acc);
            self(self, t, ab, b, bc, depth + 1, acc);
            self(self, t, ca, bc, c, depth + 1, acc);
            self(self, t, ab, bc, ca, depth + 1, acc);
            return;
        }
        rule_on(t, a, b, c, crossing, acc);
    };

    parallel_for(nt, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            if (ctx.in_fan[t]) {
                per[t] = fan_triangle(t);
                continue;
            }
            std::array<double, K> acc{};
            const Triangle& T = mesh.triangles[t];
            recurse(recurse, t, mesh.nodes[T[0]], mesh.nodes[T[1]], mesh.nodes[T[2]], 0, acc);
            per[t] = acc;
        }
    });
    std::array<double, K> total{};
    for (const auto& v : per)
        for (std::size_t q = 0; q < K; ++q) total[q] += v[q];
    return total;
}

/// Integrates h(W, |grad W|^2) over the half-disk annulus a <= r <= b (weight r dr dtheta).
template <std::size_t K, class H>
std::array<double, K> integrate_mid(const Context& ctx, H&& h) {
    static const UnitRule th_rule = unit_rule(20), r_rule = unit_rule(24);
    std::array<double, K> acc{};
    const double a = ctx.tf.a, b = ctx.tf.b;
    for (std::size_t s = 0; s + 1 < ctx.breaks.size(); ++s) {
        double t0 = ctx.breaks[s], t1 = ctx.breaks[s + 1];
        std::size_t tri = ctx.sector(0.5 * (t0 + t1));
        for (std::size_t i = 0; i < th_rule.x.size(); ++i) {
            double th = t0 + (t1 - t0) * th_rule.x[i];
            Point dir = ctx.direction(th);
            for (std::size_t j = 0; j < r_rule.x.size(); ++j) {
                double r = a + (b - a) * r_rule.x[j];
                auto [W, g2] = ctx.mid(tri, r, dir);
                auto v = h(W, g2);
                double w = (t1 - t0) * th_rule.w[i] * (b - a) * r_rule.w[j] * r;
                for (std::size_t q = 0; q < K; ++q) acc[q] += w * v[q];
            }
        }
    }
    return acc;
}

/// Integrates h(W, |grad W|^2) over the half-disk B_a with weight pi r dr.
template <std::size_t K, class H>
std::array<double, K> integrate_inner(const Context& ctx, H&& h) {
    std::array<double, K> acc{};
    for (std::size_t q = 0; q < K; ++q) {
        acc[q] = radial_integral(
            [&](double r) { return kPi * r * h(ctx.W_inner(r), ctx.grad2_inner(r))[q]; }, 0.0, ctx.tf.a, ctx.tf.eps);
    }
    return acc;
}

double exp_arg_checked(double v) {
    if (v > 700.0) throw OverflowError("exp argument exceeds 700 in the test-function integral", 0, v);
    return std::exp(v);
}

struct ExpIntegral {
    double total = 0.0;
    double inner = 0.0;
};

ExpIntegral exp_integral(const Context& ctx, double c) {
    const MoserTestFunction& tf = ctx.tf;
    const double shift = tf.int_W / (c * tf.area);
    auto h = [&](double W, double) {
        double ph = W / c - shift;
        return std::array<double, 1>{exp_arg_checked(2.0 * kPi * ph * ph)};
    };
    ExpIntegral res;
    res.inner = integrate_inner<1>(ctx, h)[0];
    double mid = integrate_mid<1>(ctx, h)[0];
    double far = integrate_far<1>(ctx, tf.b, h)[0];
    res.total = res.inner + mid + far;
    return res;
}

}  // namespace

double profile_phi(double r) { return -std::log1p(0.5 * kPi * r * r) / (2.0 * kPi); }

namespace {

double profile_residual_max(double r_max, std::size_t n) {
    const double dr = r_max / static_cast<double>(n);
    double worst = std::abs(-4.0 * (profile_phi(dr) - profile_phi(0.0)) / (dr * dr) - 1.0);
    for (std::size_t i = 1; i < n; ++i) {
        double r = dr * static_cast<double>(i);
        double pm = profile_phi(r - dr), p0 = profile_phi(r), pp = profile_phi(r + dr);
        double lap = (pp - 2.0 * p0 + pm) / (dr * dr) + (pp - pm) / (2.0 * dr * r);
        worst = std::max(worst, std::abs(-lap - std::exp(4.0 * kPi * p0)));
    }
    return worst;
}

}  // namespace

ProfileReport verify_profile(const BlowupProfile& profile) {
    if (!(profile.r_max >= 1e3) || profile.n < 10000) {
        std::ostringstream msg;
        msg << "profile grid too coarse: need r_max >= 1000 and n >= 10000 (got " << profile.r_max << ", " << profile.n << ")";
        throw ValidationError(msg.str());
    }
    ProfileReport rep;
    rep.phi0 = profile_phi(0.0);
    const double dr = profile.r_max / static_cast<double>(profile.n);
    rep.monotone = true;
    double prev = rep.phi0;
    for (std::size_t i = 1; i <= profile.n; ++i) {
        double v = profile_phi(dr * static_cast<double>(i));
        if (!(v < prev)) rep.monotone = false;
        prev = v;
    }
    const double s_max = 0.5 * kPi * profile.r_max * profile.r_max;
    rep.mass_tail = 2.0 / (1.0 + s_max);
    double body = radial_integral(
        [](double r) {
            double q = 1.0 + 0.5 * kPi * r * r;
            return 2.0 * kPi * r / (q * q);
        },
        0.0, profile.r_max, 0.5, 30);
    rep.mass = body + rep.mass_tail;

    std::vector<double> lx, ly;
    for (std::size_t f = 1; f <= 4; f *= 2) {
        std::size_t n = profile.n * f;
        double res = profile_residual_max(profile.r_max, n);
        rep.refinement.emplace_back(n, res);
        lx.push_back(std::log(profile.r_max / static_cast<double>(n)));
        ly.push_back(std::log(res));
    }
    rep.residual_max = rep.refinement.front().second;
    double mx = (lx[0] + lx[1] + lx[2]) / 3.0, my = (ly[0] + ly[1] + ly[2]) / 3.0, sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    rep.order = sxy / sxx;
    // phi' = -(r/2)/q, phi'' = -(1/2)(1 - a r^2)/q^2 with a = pi/2, q = 1 + a r^2.
    const double a = 0.5 * kPi, q = 1.0 + a;
    double d1 = -0.5 / q, d2 = -0.5 * (1.0 - a) / (q * q);
    rep.laplacian_at_1 = -d2 - d1;
    rep.rhs_at_1 = std::exp(4.0 * kPi * profile_phi(1.0));
    return rep;
}

double inner_gradient_closed_form(double R) {
    double s = kPi * R * R;
    return (std::log(s + 2.0) - std::log(2.0) - s / (s + 2.0)) / (2.0 * kPi);
}

double MoserTestFunction::W(Point x) const {
    Context ctx(*this);
    Point d = x - p;
    double r = norm(d);
    if (r < a) return ctx.W_inner(r);
    if (r < b) {
        double th = ctx.angle(d);
        return ctx.mid(ctx.sector(th), r, (1.0 / r) * d).first;
    }
    for (std::size_t t = 0; t < mesh->num_triangles(); ++t) {
        const Triangle& T = mesh->triangles[t];
        Point x0 = mesh->nodes[T[0]], x1 = mesh->nodes[T[1]], x2 = mesh->nodes[T[2]];
        double tol = -1e-12 * std::abs(cross(x1 - x0, x2 - x0));
        if (cross(x1 - x0, x - x0) >= tol && cross(x2 - x1, x - x1) >= tol && cross(x0 - x2, x - x2) >= tol)
            return ctx.far(t, x).first;
    }
    throw ValidationError("point lies outside the mesh");
}

MoserTestFunction build_test_function(const Discretization& d, const GreenResult& green, double eps,
                                      bool require_bracket) {
    if (!(eps > 0.0) || !(eps < 1.0)) throw ValidationError("test-function eps must lie in (0, 1)");
    const Mesh& mesh = *d.mesh;
    MoserTestFunction tf;
    tf.mesh = d.mesh;
    tf.eps = eps;
    tf.R = -std::log(eps);
    tf.a = tf.R * eps;
    tf.b = 2.0 * tf.a;
    tf.alpha = green.alpha;
    tf.area = d.area;
    tf.A_p = green.A_p;
    tf.p = green.p.coords;
    tf.p_node = green.p.node_id;
    tf.normal = inward_normal(mesh, tf.p_node);
    tf.chart_cap = green.r_in;
    tf.chart_cap_exceeded = !(tf.b < tf.chart_cap);

    tf.B = green.regular_part;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        Point dx = mesh.nodes[i] - tf.p;
        if (norm(dx) < green.r_in) tf.B[static_cast<Eigen::Index>(i)] = green.fit(dx);
    }

    Context ctx(tf);
    // Mean of the Green model over the whole mesh fixes delta.
    auto plain = [](double W, double) { return std::array<double, 2>{W, W * W}; };
    auto whole = integrate_far<2>(ctx, 0.0, plain);
    tf.delta = whole[0] / d.area;
    tf.A_model = tf.A_p - tf.delta;
    tf.int_G2 = whole[1] - tf.delta * tf.delta * d.area;

    auto moments = [](double W, double g2) { return std::array<double, 3>{W, W * W, g2}; };
    auto in = integrate_inner<3>(ctx, moments);
    auto mid = integrate_mid<3>(ctx, moments);
    auto far = integrate_far<3>(ctx, tf.b, moments);
    tf.int_W = in[0] + mid[0] + far[0];
    tf.int_W2 = in[1] + mid[1] + far[1];
    tf.int_grad2_inner = in[2];
    tf.int_grad2_outer = mid[2] + far[2];
    tf.int_grad2 = tf.int_grad2_inner + tf.int_grad2_outer;

    // Second route over the half-disk B_b: one 2D polar rule, pointwise zone selection.
    {
        static const UnitRule th_rule = unit_rule(20), r_rule = unit_rule(30);
        std::vector<double> rb{0.0};
        for (double r = eps; r < tf.a; r *= 2.0) rb.push_back(r);
        rb.push_back(tf.a);
        rb.push_back(tf.b);
        double acc = 0.0;
        for (std::size_t s = 0; s + 1 < ctx.breaks.size(); ++s) {
            double t0 = ctx.breaks[s], t1 = ctx.breaks[s + 1];
            std::size_t tri = ctx.sector(0.5 * (t0 + t1));
            for (std::size_t i = 0; i < th_rule.x.size(); ++i) {
                Point dir = ctx.direction(t0 + (t1 - t0) * th_rule.x[i]);
                for (std::size_t k = 0; k + 1 < rb.size(); ++k) {
                    for (std::size_t j = 0; j < r_rule.x.size(); ++j) {
                        double r = rb[k] + (rb[k + 1] - rb[k]) * r_rule.x[j];
                        double g2 = r < tf.a ? ctx.grad2_inner(r) : ctx.mid(tri, r, dir).second;
                        acc += (t1 - t0) * th_rule.w[i] * (rb[k + 1] - rb[k]) * r_rule.w[j] * r * g2;
                    }
                }
            }
        }
        tf.int_grad2_whole = acc + far[2];
    }

    const double Q = tf.int_grad2 - tf.alpha * (tf.int_W2 - tf.int_W * tf.int_W / d.area);
    tf.c2_paper = -std::log(eps) / kPi + tf.A_p + std::log(0.5 * kPi) / (2.0 * kPi) - 1.0 / (2.0 * kPi);
    tf.bracket_ok = Q >= 0.5 * tf.c2_paper && Q <= 2.0 * tf.c2_paper;
    if (!tf.bracket_ok && require_bracket) {
        std::ostringstream msg;
        msg << "normalization c^2 = " << Q << " lies outside [" << 0.5 * tf.c2_paper << ", " << 2.0 * tf.c2_paper
            << "] around the asymptotic value " << tf.c2_paper;
        throw ValidationError(msg.str());
    }
    tf.c2 = Q;
    tf.c = std::sqrt(Q);
    tf.A = -tf.c2 + std::log1p(0.5 * kPi * tf.R * tf.R) / (2.0 * kPi) - std::log(tf.a) / kPi + tf.A_model;
    tf.mean_w = tf.int_W / (tf.c * d.area);
    double Q_closed = inner_gradient_closed_form(tf.R) + tf.int_grad2_outer -
                      tf.alpha * (tf.int_W2 - tf.int_W * tf.int_W / d.area);
    tf.norm_check = std::sqrt(Q_closed) / tf.c;

    for (int k = 0; k < 16; ++k) {
        double th = kPi * (k + 0.5) / 16.0;
        Point dir = ctx.direction(th);
        std::size_t tri = ctx.sector(th);
        tf.jump_a = std::max(tf.jump_a, std::abs(ctx.W_inner(tf.a) - ctx.mid(tri, tf.a, dir).first));
        tf.jump_b = std::max(tf.jump_b, std::abs(ctx.mid(tri, tf.b, dir).first - ctx.far(tri, tf.p + tf.b * dir).first));
    }
    return tf;
}

LowerBoundReport check_lower_bound(const MoserTestFunction& tf, const GreenResult& green) {
    if (green.p.node_id != tf.p_node || green.alpha != tf.alpha)
        throw ValidationError("test function and Green solve must share p and alpha");
    Context ctx(tf);
    LowerBoundReport rep;
    rep.eps = tf.eps;
    rep.bound_B = theorem_bound(green);
    rep.chart_cap_exceeded = tf.chart_cap_exceeded;
    ExpIntegral e = exp_integral(ctx, tf.c);
    rep.integral = e.total;
    rep.inner = e.inner;
    rep.margin = e.total - rep.bound_B;
    rep.integral_paper = exp_integral(ctx, std::sqrt(tf.c2_paper)).total;
    rep.margin_paper = rep.integral_paper - rep.bound_B;
    return rep;
}

double capacity_h(const AnnulusCapacitySpec& s, double r) {
    double den = std::log(s.delta) - std::log(s.Rr_eps);
    return (s.s_eps * (std::log(r) - std::log(s.Rr_eps)) + s.i_eps * (std::log(s.delta) - std::log(r))) / den;
}

CapacityReport annulus_capacity(const AnnulusCapacitySpec& s, std::size_t panels) {
    if (!(s.Rr_eps > 0.0) || !(s.Rr_eps < s.delta)) throw ValidationError("capacity annulus needs 0 < Rr_eps < delta");
    if (!(s.s_eps <= s.i_eps)) throw ValidationError("capacity data needs s_eps <= i_eps");
    if (panels == 0) throw ValidationError("capacity quadrature needs at least one panel");
    const double den = std::log(s.delta) - std::log(s.Rr_eps);
    // h'(r) = (s - i) / (den r); integrate |h'|^2 2 pi r dr in t = log r.
    const double slope = (s.s_eps - s.i_eps) / den;
    auto integrand = [&](double t) {
        double r = std::exp(t);
        double hp = slope / r;
        return 2.0 * kPi * hp * hp * r * r;
    };
    CapacityReport rep;
    rep.energy_quadrature = composite_gauss(integrand, std::log(s.Rr_eps), std::log(s.delta), panels, 10);
    rep.energy_closed_form = 2.0 * kPi * (s.s_eps - s.i_eps) * (s.s_eps - s.i_eps) / den;
    double scale = std::max(std::abs(rep.energy_closed_form), std::numeric_limits<double>::min());
    rep.rel_diff = rep.energy_closed_form == 0.0 ? std::abs(rep.energy_quadrature)
                                                 : std::abs(rep.energy_quadrature - rep.energy_closed_form) / scale;
    rep.boundary_error = std::max(std::abs(capacity_h(s, s.delta) - s.s_eps), std::abs(capacity_h(s, s.Rr_eps) - s.i_eps));
    return rep;
}

AppendixReport appendix_integrals(const MoserTestFunction& tf) {
    Context ctx(tf);
    AppendixReport rep;
    rep.eps = tf.eps;
    rep.R = tf.R;
    const double a = tf.a, la = std::log(a);
    rep.grad_inner_closed_form = inner_gradient_closed_form(tf.R);
    rep.grad_inner_quadrature = tf.int_grad2_inner;
    rep.grad_inner_rel_diff = std::abs(rep.grad_inner_quadrature - rep.grad_inner_closed_form) / rep.grad_inner_closed_form;

    auto in = integrate_inner<2>(ctx, [](double W, double) { return std::array<double, 2>{W, W * W}; });
    rep.int_W_inner_quadrature = in[0];
    rep.int_W2_inner_quadrature = in[1];
    // With V = 1 + pi R^2/2 and W = K0 - L/(2 pi) on the half-disk:
    //   int L r dr = (eps^2/pi)(V log V - V + 1), int L^2 r dr = (eps^2/pi)(V log^2 V - 2 V log V + 2V - 2).
    const double V = 1.0 + 0.5 * kPi * tf.R * tf.R, lV = std::log(V), K0 = ctx.K0();
    const double e2 = tf.eps * tf.eps;
    const double IL = e2 / kPi * (V * lV - V + 1.0);
    const double IL2 = e2 / kPi * (V * lV * lV - 2.0 * V * lV + 2.0 * V - 2.0);
    rep.int_W_inner_closed_form = -0.5 * IL + K0 * kPi * a * a / 2.0;
    rep.int_W2_inner_closed_form = K0 * K0 * kPi * a * a / 2.0 - K0 * IL + IL2 / (4.0 * kPi);

    // Green model on B_a: S + A_model, S = -log r / pi.
    const double A = tf.A_model;
    const double int_rlog = 0.5 * a * a * la - 0.25 * a * a;
    const double int_rlog2 = 0.5 * a * a * (la * la - la + 0.5);
    const double G_in = -int_rlog + A * kPi * a * a / 2.0;
    const double G2_in = int_rlog2 / kPi - 2.0 * A * int_rlog + kPi * A * A * a * a / 2.0;

    const double nB = a * a * std::abs(la), nC = (a * la) * (a * la);
    rep.K_B_inner = std::abs(rep.int_W_inner_closed_form) / nB;
    rep.K_B_outer = std::abs(G_in) / nB;
    rep.K_B_total = std::abs(tf.int_W) / nB;
    rep.K_C_inner = std::abs(rep.int_W2_inner_closed_form) / nC;
    rep.K_C_outer = std::abs(G2_in) / nC;
    rep.K_C_total = std::abs(tf.int_W2 - tf.int_G2) / nC;
    return rep;
}

}  // namespace mtlab
