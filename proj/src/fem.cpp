#include "mtlab/fem.hpp"

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace mtlab {

namespace {

constexpr double kExpGuard = 700.0;

using Triplet = Eigen::Triplet<double>;

// Gradients of the three hat functions on triangle t (constant per element).
std::array<Point, 3> hat_gradients(const Mesh& mesh, const Triangle& t, double area) {
    const Point& a = mesh.nodes[t[0]];
    const Point& b = mesh.nodes[t[1]];
    const Point& c = mesh.nodes[t[2]];
    double s = 0.5 / area;
    return {Point{s * (b.y - c.y), s * (c.x - b.x)}, Point{s * (c.y - a.y), s * (a.x - c.x)},
            Point{s * (a.y - b.y), s * (b.x - a.x)}};
}

SpMat from_local(const Mesh& mesh, const std::vector<std::array<double, 9>>& local) {
    std::vector<Triplet> trip;
    trip.reserve(9 * mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(tr[i], tr[j], local[t][3 * i + j]);
    }
    auto n = static_cast<Eigen::Index>(mesh.num_nodes());
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    return A;
}

void check_degenerate(std::size_t t, double area) {
    if (!(area > 0.0)) throw ValidationError("degenerate triangle " + std::to_string(t));
}

}  // namespace

const TriangleRule& dunavant5() {
    static const TriangleRule rule = [] {
        const double s15 = std::sqrt(15.0);
        const double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 1200.0;
        const double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 1200.0;
        TriangleRule r{};
        r.bary[0] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        r.weight[0] = 9.0 / 40.0;
        r.bary[1] = {1.0 - 2.0 * a1, a1, a1};
        r.bary[2] = {a1, 1.0 - 2.0 * a1, a1};
        r.bary[3] = {a1, a1, 1.0 - 2.0 * a1};
        r.bary[4] = {1.0 - 2.0 * a2, a2, a2};
        r.bary[5] = {a2, 1.0 - 2.0 * a2, a2};
        r.bary[6] = {a2, a2, 1.0 - 2.0 * a2};
        for (int q = 1; q <= 3; ++q) r.weight[q] = w1;
        for (int q = 4; q <= 6; ++q) r.weight[q] = w2;
        return r;
    }();
    return rule;
}

SpMat assemble_stiffness(const Mesh& mesh) {
    std::vector<std::array<double, 9>> local(mesh.triangles.size());
    parallel_for(mesh.triangles.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            double area = mesh.signed_area(t);
            check_degenerate(t, area);
            auto g = hat_gradients(mesh, mesh.triangles[t], area);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) local[t][3 * i + j] = area * dot(g[i], g[j]);
        }
    });
    return from_local(mesh, local);
}

SpMat assemble_mass(const Mesh& mesh) {
    std::vector<std::array<double, 9>> local(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        double area = mesh.signed_area(t);
        check_degenerate(t, area);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) local[t][3 * i + j] = area * (i == j ? 2.0 : 1.0) / 12.0;
    }
    return from_local(mesh, local);
}

MeanZeroSolver::MeanZeroSolver(const SpMat& K, const SpMat& M, const Vec& m, double area, double alpha)
    : K_(&K), M_(&M), m_(&m), area_(area), alpha_(alpha) {
    // Node 0 pinned: drop its row and column, leaving an SPD matrix.
    const Eigen::Index n = K.rows();
    std::vector<Triplet> trip;
    for (Eigen::Index c = 0; c < K.outerSize(); ++c)
        for (SpMat::InnerIterator it(K, c); it; ++it)
            if (it.row() > 0 && it.col() > 0) trip.emplace_back(it.row() - 1, it.col() - 1, it.value());
    SpMat Kr(n - 1, n - 1);
    Kr.setFromTriplets(trip.begin(), trip.end());
    pinned_.compute(Kr);
    if (pinned_.info() != Eigen::Success) throw ValidationError("stiffness matrix with one pinned node is not positive definite");
}

Vec MeanZeroSolver::reduce(const Vec& r) const { return r - (r.sum() / area_) * (*m_); }

Vec MeanZeroSolver::project(const Vec& x) const { return x - (m_->dot(x) / area_) * Vec::Ones(x.size()); }

Vec MeanZeroSolver::apply_kplus(const Vec& b) const {
    Vec rb = reduce(b);
    Vec x = Vec::Zero(b.size());
    x.tail(b.size() - 1) = pinned_.solve(rb.tail(b.size() - 1));
    return project(x);
}

Vec MeanZeroSolver::solve(const Vec& b) const {
    if (alpha_ == 0.0) {
        last_iterations_ = 1;
        return apply_kplus(b);
    }
    auto apply = [&](const Vec& v) { return reduce(Vec(*K_ * v - alpha_ * (*M_ * v))); };
    Vec x = Vec::Zero(b.size());
    Vec r = reduce(b);
    Vec z = apply_kplus(r);
    Vec p = z;
    double rz = r.dot(z);
    const double rz0 = rz;
    int it = 0;
    constexpr int kMaxIter = 1000;
    while (rz > 1e-28 * rz0 && rz > 0.0 && it < kMaxIter) {
        Vec Ap = apply(p);
        double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) throw ValidationError("K - alpha M is not positive on mean-zero fields (alpha >= discrete lambda1?)");
        double step = rz / pAp;
        x += step * p;
        r -= step * Ap;
        z = apply_kplus(r);
        double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++it;
    }
    last_iterations_ = it;
    if (it == kMaxIter) throw ConvergenceError("PCG on the mean-zero subspace did not converge", std::sqrt(rz / rz0), it);
    return project(x);
}

Discretization::Discretization(MeshPtr mesh_in) : mesh(std::move(mesh_in)) {
    if (!mesh) throw ValidationError("null mesh");
    K = assemble_stiffness(*mesh);
    M = assemble_mass(*mesh);
    m = M * Vec::Ones(static_cast<Eigen::Index>(mesh->num_nodes()));
    area = mesh->area;
    M_factor.compute(M);
    if (M_factor.info() != Eigen::Success) throw ValidationError("mass matrix is not positive definite");
}

Vec Discretization::project_mean_zero(const Vec& u) const {
    return u - (m.dot(u) / area) * Vec::Ones(u.size());
}

double Discretization::dual_norm(const Vec& r) const {
    Vec y = M_factor.solve(r);
    return std::sqrt(std::max(0.0, r.dot(y)));
}

const MeanZeroSolver& Discretization::solver(double alpha) const {
    std::lock_guard<std::mutex> lock(solvers_mutex_);
    for (const auto& [a, s] : solvers_)
        if (a == alpha) return *s;
    solvers_.emplace_back(alpha, std::make_unique<MeanZeroSolver>(K, M, m, area, alpha));
    return *solvers_.back().second;
}

DiscretizationPtr discretize(MeshPtr mesh) { return std::make_shared<const Discretization>(std::move(mesh)); }

double norm_1alpha(const Discretization& d, const Vec& u, double alpha) {
    double q = u.dot(d.K * u) - alpha * u.dot(d.M * u);
    double scale = u.dot(d.K * u);
    if (q < -1e-14 * std::max(scale, 1.0))
        throw ValidationError("negative quadratic form in norm_1alpha: alpha is at or above the discrete lambda1");
    return std::sqrt(std::max(q, 0.0));
}

namespace {

struct LocalMoments {
    double I0 = 0.0, I1 = 0.0, I2 = 0.0;
    std::array<double, 3> load{};
    double max_exponent = 0.0;
};

LocalMoments local_moments(const Mesh& mesh, std::size_t t, const Vec& u, double beta) {
    const auto& rule = dunavant5();
    const auto& tr = mesh.triangles[t];
    double area = mesh.signed_area(t);
    LocalMoments out;
    for (int q = 0; q < 7; ++q) {
        const auto& l = rule.bary[q];
        double uq = l[0] * u[tr[0]] + l[1] * u[tr[1]] + l[2] * u[tr[2]];
        double ex = beta * uq * uq;
        out.max_exponent = std::max(out.max_exponent, ex);
        if (ex > kExpGuard) continue;
        double w = rule.weight[q] * area * std::exp(ex);
        out.I0 += w;
        out.I1 += w * uq;
        out.I2 += w * uq * uq;
        for (int i = 0; i < 3; ++i) out.load[i] += w * uq * l[i];
    }
    return out;
}

[[noreturn]] void throw_overflow(const Mesh& mesh, const Vec& u, std::size_t t, double exponent) {
    const auto& tr = mesh.triangles[t];
    double umax = std::max({std::abs(u[tr[0]]), std::abs(u[tr[1]]), std::abs(u[tr[2]])});
    std::ostringstream msg;
    msg << "exponent " << exponent << " exceeds " << kExpGuard << " on triangle " << t << " (max |u| = " << umax
        << "); use a smaller exponent or a coarser mesh";
    throw OverflowError(msg.str(), t, u.cwiseAbs().maxCoeff());
}

std::vector<LocalMoments> all_moments(const Mesh& mesh, const Vec& u, double beta) {
    if (!(beta >= 0.0)) throw ValidationError("beta must be non-negative");
    if (static_cast<std::size_t>(u.size()) != mesh.num_nodes()) throw ValidationError("field size does not match the mesh");
    std::vector<LocalMoments> local(mesh.triangles.size());
    parallel_for(mesh.triangles.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) local[t] = local_moments(mesh, t, u, beta);
    });
    for (std::size_t t = 0; t < local.size(); ++t)
        if (local[t].max_exponent > kExpGuard) throw_overflow(mesh, u, t, local[t].max_exponent);
    return local;
}

}  // namespace

double functional_exp(const Mesh& mesh, const Vec& u, double beta) {
    auto local = all_moments(mesh, u, beta);
    double s = 0.0;
    for (const auto& l : local) s += l.I0;
    return s;
}

ExpMoments exp_moments(const Mesh& mesh, const Vec& u, double beta) {
    auto local = all_moments(mesh, u, beta);
    ExpMoments out;
    out.load = Vec::Zero(u.size());
    for (std::size_t t = 0; t < local.size(); ++t) {
        out.I0 += local[t].I0;
        out.I1 += local[t].I1;
        out.I2 += local[t].I2;
        for (int i = 0; i < 3; ++i) out.load[mesh.triangles[t][i]] += local[t].load[i];
    }
    return out;
}

double exp_load(const Mesh& mesh, const Vec& f, const Vec& u, Vec& load, SpMat* matrix) {
    const auto& rule = dunavant5();
    const std::size_t nt = mesh.triangles.size();
    std::vector<std::array<double, 9>> mat(matrix ? nt : 0);
    std::vector<std::array<double, 3>> vec(nt);
    std::vector<double> total(nt, 0.0), worst(nt, 0.0);
    parallel_for(nt, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            const auto& tr = mesh.triangles[t];
            double area = mesh.signed_area(t);
            std::array<double, 3> v{};
            std::array<double, 9> a{};
            double tot = 0.0;
            for (int q = 0; q < 7; ++q) {
                const auto& l = rule.bary[q];
                double uq = l[0] * u[tr[0]] + l[1] * u[tr[1]] + l[2] * u[tr[2]];
                double fq = l[0] * f[tr[0]] + l[1] * f[tr[1]] + l[2] * f[tr[2]];
                worst[t] = std::max(worst[t], uq);
                if (uq > kExpGuard) continue;
                double w = rule.weight[q] * area * fq * std::exp(uq);
                tot += w;
                for (int i = 0; i < 3; ++i) {
                    v[i] += w * l[i];
                    if (matrix)
                        for (int j = 0; j < 3; ++j) a[3 * i + j] += w * l[i] * l[j];
                }
            }
            total[t] = tot;
            vec[t] = v;
            if (matrix) mat[t] = a;
        }
    });
    for (std::size_t t = 0; t < nt; ++t)
        if (worst[t] > kExpGuard) throw_overflow(mesh, u, t, worst[t]);
    load = Vec::Zero(u.size());
    double Z = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
        Z += total[t];
        for (int i = 0; i < 3; ++i) load[mesh.triangles[t][i]] += vec[t][i];
    }
    if (matrix) *matrix = from_local(mesh, mat);
    return Z;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
    return os.str();
}

std::string mesh_hash(const Mesh& mesh) { return sha256_hex(mesh_to_string(mesh)); }

void write_field(std::ostream& os, const Vec& u, const std::string& mesh_sha) {
    os << "mt-field v1\n" << "mesh-sha256 " << mesh_sha << '\n' << "nodes " << u.size() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < u.size(); ++i) os << u[i] << '\n';
}

std::string field_to_string(const Vec& u, const std::string& mesh_sha) {
    std::ostringstream os;
    write_field(os, u, mesh_sha);
    return os.str();
}

Vec read_field(std::istream& is, const std::string& expected_sha) {
    std::string line, word, sha;
    if (!std::getline(is, line) || line.rfind("mt-field v1", 0) != 0) throw ValidationError("field file: missing 'mt-field v1' header");
    if (!(is >> word >> sha) || word != "mesh-sha256") throw ValidationError("field file: missing mesh-sha256 line");
    if (!expected_sha.empty() && sha != expected_sha) throw ValidationError("field file belongs to a different mesh");
    long long n = -1;
    if (!(is >> word >> n) || word != "nodes" || n < 0) throw ValidationError("field file: missing node count");
    Vec u(n);
    for (long long i = 0; i < n; ++i) {
        if (!(is >> u[i])) throw ValidationError("field file: truncated values");
        if (!std::isfinite(u[i])) throw ValidationError("field file: non-finite value");
    }
    return u;
}

Vec load_field(const std::string& path, const std::string& expected_sha) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open field file " + path);
    return read_field(in, expected_sha);
}

void save_field(const std::string& path, const Vec& u, const std::string& mesh_sha) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write field file " + path);
    write_field(out, u, mesh_sha);
}

}  // namespace mtlab
