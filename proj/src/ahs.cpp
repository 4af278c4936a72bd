#include "hsres/ahs.hpp"

#include "hsres/error.hpp"
#include "hsres/parallel.hpp"
#include "hsres/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>

namespace hsres {

namespace {

constexpr double pi = std::numbers::pi;

double sq(double x) { return x * x; }

// Bohr radius of the light particle bound to heavy k
double bohr_radius(const ThreeBodyMasses& m, int heavy)
{
    const double mk = heavy == 1 ? m.m1 : m.m2;
    const int zk = heavy == 1 ? m.z1 : m.z2;
    return (mk + 1.0) / mk / std::abs(zk * m.z_light);
}

struct Cluster {
    double center;
    double width;
    double weight = 1.0;
    bool cusp = false; // 1/(|x - c| + w) instead of exp(-|x - c|/w)
};

// Element vertices on [lo, hi] equidistributing a density that is uniform
// plus an exponential peak per cluster; `forced` points become vertices.
std::vector<double> graded_vertices(int elements, double lo, double hi, const std::vector<Cluster>& clusters,
                                    double fraction, const std::vector<double>& forced)
{
    double total = 0.0;
    for (const auto& c : clusters)
        total += c.weight;
    const double uniform = clusters.empty() ? 1.0 : 1.0 - fraction;
    // cumulative cluster densities
    auto peak = [](const Cluster& c, double x) {
        if (c.cusp)
            return std::copysign(std::log1p(std::abs(x - c.center) / c.width), x - c.center);
        return x < c.center ? c.width * std::exp(-(c.center - x) / c.width)
                            : c.width * (2.0 - std::exp(-(x - c.center) / c.width));
    };
    auto D = [&](double x) {
        double d = uniform * (x - lo) / (hi - lo);
        for (const auto& c : clusters) {
            const double a = peak(c, lo), b = peak(c, hi);
            d += fraction * c.weight / total * (peak(c, x) - a) / (b - a);
        }
        return d;
    };
    // segments between forced points get elements in proportion to their share
    std::vector<double> breaks = {lo, hi};
    for (double p : forced)
        if (p > lo && p < hi)
            breaks.push_back(p);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    const int segments = static_cast<int>(breaks.size()) - 1;
    require(elements >= segments, ErrorKind::Validation, "too few elements for the forced mesh points");
    std::vector<int> count(static_cast<std::size_t>(segments), 1);
    std::vector<double> want(static_cast<std::size_t>(segments));
    for (int s = 0; s < segments; ++s)
        want[static_cast<std::size_t>(s)] =
            elements * (D(breaks[static_cast<std::size_t>(s + 1)]) - D(breaks[static_cast<std::size_t>(s)]));
    for (int left = elements - segments; left > 0; --left) {
        int best = 0;
        for (int s = 1; s < segments; ++s)
            if (want[static_cast<std::size_t>(s)] - count[static_cast<std::size_t>(s)] >
                want[static_cast<std::size_t>(best)] - count[static_cast<std::size_t>(best)])
                best = s;
        ++count[static_cast<std::size_t>(best)];
    }
    std::vector<double> v = {lo};
    for (int s = 0; s < segments; ++s) {
        const double x0 = breaks[static_cast<std::size_t>(s)], x1 = breaks[static_cast<std::size_t>(s + 1)];
        const double d0 = D(x0), d1 = D(x1);
        const int m = count[static_cast<std::size_t>(s)];
        for (int i = 1; i < m; ++i) {
            const double target = d0 + (d1 - d0) * i / m;
            double a = x0, b = x1;
            for (int it = 0; it < 100 && b - a > 1e-15 * (hi - lo); ++it) {
                const double mid = 0.5 * (a + b);
                (D(mid) < target ? a : b) = mid;
            }
            v.push_back(0.5 * (a + b));
        }
        v.push_back(x1);
    }
    return v;
}

std::vector<double> with_midpoints(const std::vector<double>& vertices)
{
    std::vector<double> nodes;
    nodes.reserve(2 * vertices.size() - 1);
    for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
        nodes.push_back(vertices[i]);
        nodes.push_back(0.5 * (vertices[i] + vertices[i + 1]));
    }
    nodes.push_back(vertices.back());
    return nodes;
}

void quadratic(double x, double* n, double* dn)
{
    n[0] = 0.5 * x * (x - 1.0);
    n[1] = 1.0 - x * x;
    n[2] = 0.5 * x * (x + 1.0);
    if (dn) {
        dn[0] = x - 0.5;
        dn[1] = -2.0 * x;
        dn[2] = x + 0.5;
    }
}

// element containing x and the reference coordinate in it
std::pair<int, double> locate(const std::vector<double>& nodes, double x)
{
    const int elements = static_cast<int>(nodes.size() - 1) / 2;
    int lo = 0, hi = elements - 1;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (nodes[static_cast<std::size_t>(2 * mid)] <= x)
            lo = mid;
        else
            hi = mid - 1;
    }
    const double a = nodes[static_cast<std::size_t>(2 * lo)], b = nodes[static_cast<std::size_t>(2 * lo + 2)];
    return {lo, std::clamp(2.0 * (x - a) / (b - a) - 1.0, -1.0, 1.0)};
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v, const SparseMatrix& M)
{
    const double mean = (M * v).sum();
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const double s = std::abs(mean) > 1e-8 * v.cwiseAbs().maxCoeff() ? mean : v(imax);
    if (s < 0.0)
        v = -v;
}

// Greedy maximum-overlap matching of the rows of S to distinct columns.
std::vector<int> match_states(const RealMatrix& S)
{
    const int rows = static_cast<int>(S.rows()), cols = static_cast<int>(S.cols());
    std::vector<int> to(static_cast<std::size_t>(rows), -1);
    std::vector<bool> used(static_cast<std::size_t>(cols), false);
    for (int step = 0; step < std::min(rows, cols); ++step) {
        double best = -1.0;
        int br = 0, bc = 0;
        for (int r = 0; r < rows; ++r) {
            if (to[static_cast<std::size_t>(r)] >= 0)
                continue;
            for (int c = 0; c < cols; ++c)
                if (!used[static_cast<std::size_t>(c)] && std::abs(S(r, c)) > best) {
                    best = std::abs(S(r, c));
                    br = r;
                    bc = c;
                }
        }
        to[static_cast<std::size_t>(br)] = bc;
        used[static_cast<std::size_t>(bc)] = true;
    }
    return to;
}

// one hyperradius with its derivative stencil; states in energy order,
// including the buffer above the requested terms
struct PointResult {
    double rho = 0.0;
    Eigen::VectorXd energies;
    RealMatrix H;
    RealMatrix Q;
    std::vector<bool> valid; // derivative stencil followed the state
    AngularMesh mesh;
    // nodal values and their products with the metric, for overlaps with neighbors
    Eigen::MatrixXf vectors;
    Eigen::MatrixXf weighted;
};

constexpr int buffer_states = 2;

PointResult solve_point(const ThreeBodyMasses& masses, const HyperangularGrid& grid, double rho,
                        const AdiabaticOptions& options, PotentialMode mode)
{
    const int n = options.n_terms + buffer_states;
    const AdiabaticOperator op = assemble_adiabatic_operator(masses, build_mesh(masses, grid, rho), mode);
    const AngularStates s0 = solve_angular(op, rho, n);
    const double d = options.derivative_step * rho;
    PointResult r;
    r.valid.assign(static_cast<std::size_t>(n), true);
    Eigen::MatrixXd side[2];
    int k = 0;
    for (double shift : {d, -d}) {
        const AngularStates s = solve_angular(op, rho + shift, n, s0.energies(0));
        const RealMatrix overlap = s0.vectors.transpose() * (op.M * s.vectors);
        const std::vector<int> to = match_states(overlap);
        side[k].resize(s.vectors.rows(), n);
        for (int j = 0; j < n; ++j) {
            const int c = to[static_cast<std::size_t>(j)];
            const double o = overlap(j, c);
            if (std::abs(o) < 0.5)
                r.valid[static_cast<std::size_t>(j)] = false;
            side[k].col(j) = o < 0.0 ? Eigen::VectorXd(-s.vectors.col(c)) : Eigen::VectorXd(s.vectors.col(c));
        }
        ++k;
    }
    const Eigen::MatrixXd dphi = (side[0] - side[1]) / (2.0 * d);
    const Eigen::MatrixXd Mdphi = op.M * dphi;
    r.rho = rho;
    r.energies = s0.energies;
    r.Q = -(s0.vectors.transpose() * Mdphi);
    r.H = dphi.transpose() * Mdphi;
    r.H = 0.5 * (r.H + r.H.transpose()).eval();
    r.mesh = op.mesh;
    r.vectors = s0.vectors.cast<float>();
    r.weighted = (op.M * s0.vectors).cast<float>();
    return r;
}

// natural cubic spline second derivatives for every column of y over x
Eigen::MatrixXd spline_second(const std::vector<double>& x, const Eigen::MatrixXd& y)
{
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, y.cols());
    if (n < 3)
        return m;
    std::vector<double> diag(static_cast<std::size_t>(n)), upper(static_cast<std::size_t>(n));
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, y.cols());
    for (int i = 1; i + 1 < n; ++i) {
        const double h0 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i - 1)];
        const double h1 = x[static_cast<std::size_t>(i + 1)] - x[static_cast<std::size_t>(i)];
        diag[static_cast<std::size_t>(i)] = (h0 + h1) / 3.0;
        upper[static_cast<std::size_t>(i)] = h1 / 6.0;
        rhs.row(i) = (y.row(i + 1) - y.row(i)) / h1 - (y.row(i) - y.row(i - 1)) / h0;
    }
    // Thomas elimination on rows 1..n-2 (lower entries equal h0/6)
    for (int i = 2; i + 1 < n; ++i) {
        const double h0 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i - 1)];
        const double w = (h0 / 6.0) / diag[static_cast<std::size_t>(i - 1)];
        diag[static_cast<std::size_t>(i)] -= w * upper[static_cast<std::size_t>(i - 1)];
        rhs.row(i) -= w * rhs.row(i - 1);
    }
    for (int i = n - 2; i >= 1; --i) {
        Eigen::RowVectorXd r = rhs.row(i);
        if (i + 2 < n)
            r -= upper[static_cast<std::size_t>(i)] * m.row(i + 1);
        m.row(i) = r / diag[static_cast<std::size_t>(i)];
    }
    return m;
}

} // namespace

void ThreeBodyMasses::validate() const
{
    require(std::isfinite(m1) && std::isfinite(m2) && m1 > 0.0 && m2 > 0.0, ErrorKind::Validation,
            "heavy masses must be positive");
    require(z1 * z_light < 0 && z2 * z_light < 0, ErrorKind::Validation,
            "the light particle must attract both heavy ones");
}

double ThreeBodyMasses::mu() const { return 1.0 / (1.0 + 1.0 / (m1 + m2)); }

double ThreeBodyMasses::M() const { return m1 * m2 / (m1 + m2); }

double ThreeBodyMasses::beta(int heavy) const { return (heavy == 1 ? m2 : m1) / (m1 + m2); }

double ThreeBodyMasses::coalescence_chi(int heavy) const
{
    return 2.0 * std::atan(std::sqrt(mu() / M()) * beta(heavy));
}

double ThreeBodyMasses::atomic_level(int heavy, int n) const
{
    require(heavy == 1 || heavy == 2, ErrorKind::Domain, "heavy particle index must be 1 or 2");
    require(n >= 1, ErrorKind::Domain, "principal quantum number must be positive");
    const double mk = heavy == 1 ? m1 : m2;
    const double z = (heavy == 1 ? z1 : z2) * z_light;
    return -z * z * (mk / (mk + 1.0)) / (2.0 * n * n);
}

double ThreeBodyMasses::channel_reduced_mass(int heavy) const
{
    const double atom = (heavy == 1 ? m1 : m2) + 1.0, other = heavy == 1 ? m2 : m1;
    return atom * other / (atom + other);
}

double ThreeBodyMasses::scaled_potential(double chi, double theta) const
{
    const double r = std::sin(0.5 * chi) / std::sqrt(2.0 * mu());
    const double R = std::cos(0.5 * chi) / std::sqrt(2.0 * M());
    const double c = std::cos(theta);
    const double b1 = beta(1), b2 = beta(2);
    const double d1 = std::sqrt(std::max(0.0, r * r + sq(b1 * R) + 2.0 * b1 * r * R * c));
    const double d2 = std::sqrt(std::max(0.0, r * r + sq(b2 * R) - 2.0 * b2 * r * R * c));
    return z1 * z2 / R + z1 * z_light / d1 + z2 * z_light / d2;
}

void HyperangularGrid::validate() const
{
    require(n_chi >= 3 && n_theta >= 3 && n_chi % 2 == 1 && n_theta % 2 == 1, ErrorKind::Validation,
            "hyperangular node counts must be odd and at least 3");
    require(cluster_fraction >= 0.0 && cluster_fraction < 1.0 && width_scale > 0.0 && halo_scale > 0.0 &&
                cusp_weight >= 0.0 && cusp_width > 0.0,
            ErrorKind::Validation,
            "invalid hyperangular grading");
}

AngularMesh build_mesh(const ThreeBodyMasses& masses, const HyperangularGrid& grid, double rho)
{
    masses.validate();
    grid.validate();
    require(rho > 0.0 && std::isfinite(rho), ErrorKind::Domain, "hyperradius must be positive");
    const int ec = (grid.n_chi - 1) / 2, et = (grid.n_theta - 1) / 2;
    std::vector<Cluster> cc, ct;
    std::vector<double> forced;
    if (grid.graded) {
        for (int k = 1; k <= 2; ++k) {
            const double chik = masses.coalescence_chi(k), a = bohr_radius(masses, k);
            const double R = rho * std::cos(0.5 * chik) / std::sqrt(2.0 * masses.M());
            const double wc = grid.width_scale * 2.0 * std::sqrt(2.0 * masses.mu()) * a / (rho * std::cos(0.5 * chik));
            // transverse to the axis the atom is resolved best with wider peaks
            const double wt = 1.4 * grid.width_scale * a / (masses.beta(k) * R);
            for (double f : {1.0, grid.halo_scale}) {
                cc.push_back({chik, std::min(f * wc, 2.0)});
                ct.push_back({k == 1 ? pi : 0.0, std::min(f * wt, 2.0)});
            }
            if (grid.cusp_weight > 0.0) {
                cc.push_back({chik, std::min(grid.cusp_width * wc, 2.0), grid.cusp_weight, true});
                ct.push_back({k == 1 ? pi : 0.0, std::min(grid.cusp_width * wt, 2.0), grid.cusp_weight, true});
            }
            forced.push_back(chik);
        }
    }
    AngularMesh mesh;
    mesh.chi = with_midpoints(graded_vertices(ec, 0.0, pi, cc, grid.cluster_fraction, forced));
    mesh.theta = with_midpoints(graded_vertices(et, 0.0, pi, ct, grid.cluster_fraction, {}));
    return mesh;
}

AngularMesh refine(const AngularMesh& mesh)
{
    auto split = [](const std::vector<double>& nodes) {
        std::vector<double> vertices(nodes.begin(), nodes.end());
        return with_midpoints(vertices);
    };
    return {split(mesh.chi), split(mesh.theta)};
}

double AngularMesh::interpolate(const Eigen::VectorXd& u, double c, double t) const
{
    const auto [ec, xc] = locate(chi, c);
    const auto [et, xt] = locate(theta, t);
    double nc[3], nt[3];
    quadratic(xc, nc, nullptr);
    quadratic(xt, nt, nullptr);
    double v = 0.0;
    for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a)
            v += nc[a] * nt[b] * u(index(2 * ec + a, 2 * et + b));
    return v;
}

Eigen::VectorXd AngularMesh::transfer(const Eigen::VectorXd& u, const AngularMesh& other) const
{
    Eigen::VectorXd out(other.nodes());
    for (std::size_t j = 0; j < other.theta.size(); ++j)
        for (std::size_t i = 0; i < other.chi.size(); ++i)
            out(other.index(static_cast<int>(i), static_cast<int>(j))) = interpolate(u, other.chi[i], other.theta[j]);
    return out;
}

SparseMatrix AdiabaticOperator::at(double rho) const
{
    require(rho > 0.0, ErrorKind::Domain, "hyperradius must be positive");
    return SparseMatrix((4.0 / (rho * rho)) * K + (1.0 / rho) * C);
}

AdiabaticOperator assemble_adiabatic_operator(const ThreeBodyMasses& masses, const AngularMesh& mesh,
                                              PotentialMode mode)
{
    masses.validate();
    const int nc = static_cast<int>(mesh.chi.size()), nt = static_cast<int>(mesh.theta.size());
    require(nc >= 3 && nt >= 3 && nc % 2 == 1 && nt % 2 == 1, ErrorKind::Validation, "malformed angular mesh");
    const QuadratureRule rule = gauss_legendre(5), duffy = gauss_legendre(8);
    // particle-coalescence points are element corners; elements touching one
    // are integrated on two triangles collapsed onto it, which cancels the
    // Coulomb singularity
    std::vector<std::array<double, 2>> singular;
    if (mode == PotentialMode::Coulomb)
        singular = {{masses.coalescence_chi(1), pi}, {masses.coalescence_chi(2), 0.0}};

    struct Point {
        double c, t, w;
    };
    std::vector<Point> points;
    std::vector<Eigen::Triplet<double>> tk, tc, tm;
    const std::size_t per = static_cast<std::size_t>((nc - 1) / 2) * static_cast<std::size_t>((nt - 1) / 2) * 81;
    tk.reserve(per);
    tc.reserve(per);
    tm.reserve(per);
    double ke[9][9], ce[9][9], me[9][9];
    for (int et = 0; 2 * et + 2 < nt; ++et) {
        const double t0 = mesh.theta[static_cast<std::size_t>(2 * et)];
        const double ht = mesh.theta[static_cast<std::size_t>(2 * et + 2)] - t0;
        for (int ec = 0; 2 * ec + 2 < nc; ++ec) {
            const double c0 = mesh.chi[static_cast<std::size_t>(2 * ec)];
            const double hc = mesh.chi[static_cast<std::size_t>(2 * ec + 2)] - c0;
            points.clear();
            const std::array<double, 2> corners[4] = {{c0, t0}, {c0 + hc, t0}, {c0 + hc, t0 + ht}, {c0, t0 + ht}};
            int corner = -1;
            for (const auto& p : singular)
                for (int k = 0; k < 4; ++k)
                    if (std::abs(corners[k][0] - p[0]) < 1e-13 && std::abs(corners[k][1] - p[1]) < 1e-13)
                        corner = k;
            if (corner < 0) {
                for (std::size_t qb = 0; qb < rule.nodes.size(); ++qb)
                    for (std::size_t qa = 0; qa < rule.nodes.size(); ++qa)
                        points.push_back({c0 + 0.5 * hc * (rule.nodes[qa] + 1.0), t0 + 0.5 * ht * (rule.nodes[qb] + 1.0),
                                          rule.weights[qa] * rule.weights[qb] * 0.25 * hc * ht});
            } else {
                const auto& P = corners[corner];
                for (int tri = 0; tri < 2; ++tri) {
                    const auto& A = corners[(corner + 1 + tri) % 4];
                    const auto& B = corners[(corner + 2 + tri) % 4];
                    const double jac = std::abs((A[0] - P[0]) * (B[1] - A[1]) - (A[1] - P[1]) * (B[0] - A[0]));
                    for (std::size_t qu = 0; qu < duffy.nodes.size(); ++qu)
                        for (std::size_t qv = 0; qv < duffy.nodes.size(); ++qv) {
                            const double u = 0.5 * (duffy.nodes[qu] + 1.0), v = 0.5 * (duffy.nodes[qv] + 1.0);
                            points.push_back({P[0] + u * (A[0] - P[0] + v * (B[0] - A[0])),
                                              P[1] + u * (A[1] - P[1] + v * (B[1] - A[1])),
                                              0.25 * duffy.weights[qu] * duffy.weights[qv] * u * jac});
                        }
                }
            }
            std::fill(&ke[0][0], &ke[0][0] + 81, 0.0);
            std::fill(&ce[0][0], &ce[0][0] + 81, 0.0);
            std::fill(&me[0][0], &me[0][0] + 81, 0.0);
            for (const Point& q : points) {
                double pc[3], dpc[3], pt[3], dpt[3];
                quadratic(2.0 * (q.c - c0) / hc - 1.0, pc, dpc);
                quadratic(2.0 * (q.t - t0) / ht - 1.0, pt, dpt);
                const double st = std::sin(q.t), sc2 = sq(std::sin(q.c));
                const double v = mode == PotentialMode::Coulomb ? masses.scaled_potential(q.c, q.t) : 0.0;
                double f[9], fc[9], ft[9];
                for (int b = 0; b < 3; ++b)
                    for (int a = 0; a < 3; ++a) {
                        f[3 * b + a] = pc[a] * pt[b];
                        fc[3 * b + a] = dpc[a] * pt[b] * 2.0 / hc;
                        ft[3 * b + a] = pc[a] * dpt[b] * 2.0 / ht;
                    }
                const double wm = q.w * sc2 * st, wt = q.w * st;
                for (int i = 0; i < 9; ++i)
                    for (int j = 0; j < 9; ++j) {
                        me[i][j] += wm * f[i] * f[j];
                        ce[i][j] += wm * v * f[i] * f[j];
                        ke[i][j] += wm * fc[i] * fc[j] + wt * ft[i] * ft[j];
                    }
            }
            int dof[9];
            for (int b = 0; b < 3; ++b)
                for (int a = 0; a < 3; ++a)
                    dof[3 * b + a] = mesh.index(2 * ec + a, 2 * et + b);
            for (int i = 0; i < 9; ++i)
                for (int j = 0; j < 9; ++j) {
                    tk.emplace_back(dof[i], dof[j], ke[i][j]);
                    tc.emplace_back(dof[i], dof[j], ce[i][j]);
                    tm.emplace_back(dof[i], dof[j], me[i][j]);
                }
        }
    }
    AdiabaticOperator op;
    op.mesh = mesh;
    const int n = mesh.nodes();
    op.K.resize(n, n);
    op.C.resize(n, n);
    op.M.resize(n, n);
    op.K.setFromTriplets(tk.begin(), tk.end());
    op.C.setFromTriplets(tc.begin(), tc.end());
    op.M.setFromTriplets(tm.begin(), tm.end());
    return op;
}

AngularStates solve_angular(const AdiabaticOperator& op, double rho, int n, std::optional<double> lowest)
{
    require(n >= 1 && n < op.mesh.nodes(), ErrorKind::Validation, "invalid number of adiabatic terms");
    const SparseMatrix A = op.at(rho);
    // the Rayleigh quotient of a constant bounds the lowest term from above
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(op.mesh.nodes());
    const double rq = one.dot(A * one) / one.dot(op.M * one);
    double sigma = rq - (std::abs(rq) + 1.0);
    if (lowest && *lowest < rq)
        sigma = *lowest - 0.02 * (std::abs(*lowest) + 1e-3);
    for (int tries = 0;; ++tries) {
        require(tries < 60, ErrorKind::Convergence, "no shift below the lowest adiabatic term");
        const ShiftInvertSolver solver(A, op.M, sigma);
        if (solver.count_below() == 0) {
            const EigenPairs pairs = solver.nearest(n);
            AngularStates s;
            s.rho = rho;
            s.energies = pairs.values;
            s.vectors = pairs.vectors;
            for (int j = 0; j < n; ++j)
                fix_sign(s.vectors.col(j), op.M);
            return s;
        }
        sigma -= 2.0 * (std::abs(sigma) + 1.0);
    }
}

std::vector<double> geometric_grid(double rho_min, double rho_max, int points)
{
    require(rho_min > 0.0 && rho_max > rho_min && points >= 2, ErrorKind::Validation,
            "need 0 < rho_min < rho_max and at least two points");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        g[static_cast<std::size_t>(i)] = rho_min * std::pow(rho_max / rho_min, double(i) / (points - 1));
    g.back() = rho_max;
    return g;
}

AdiabaticSolution compute_adiabatic(const ThreeBodyMasses& masses, const HyperangularGrid& grid,
                                    std::vector<double> rho_grid, const AdiabaticOptions& options,
                                    PotentialMode mode)
{
    masses.validate();
    grid.validate();
    require(options.n_terms >= 1, ErrorKind::Validation, "need at least one adiabatic term");
    require(options.derivative_step > 0.0 && options.derivative_step < 0.1, ErrorKind::Validation,
            "derivative step must lie in (0, 0.1)");
    require(options.min_interval > 2.0 * options.derivative_step && options.max_rotation > 0.0 &&
                options.refine_passes >= 0,
            ErrorKind::Validation, "invalid tracking options");
    require(!rho_grid.empty(), ErrorKind::Validation, "empty hyperradial grid");
    std::sort(rho_grid.begin(), rho_grid.end());
    rho_grid.erase(std::unique(rho_grid.begin(), rho_grid.end()), rho_grid.end());
    require(rho_grid.front() > 0.0, ErrorKind::Domain, "hyperradii must be positive");

    const int n = options.n_terms;
    std::map<double, PointResult> points;
    auto compute = [&](const std::vector<double>& rhos) {
        std::vector<PointResult> out(rhos.size());
        parallel_for(
            rhos.size(), [&](std::size_t i) { out[i] = solve_point(masses, grid, rhos[i], options, mode); },
            options.threads);
        for (auto& p : out)
            points.emplace(p.rho, std::move(p));
    };

    // Terms are followed by overlap continuity from the smallest hyperradius:
    // each label goes to the best-matching state of the next point, with the
    // sign that keeps the overlap positive. Intervals where some label turns
    // too far or changes energy rank are bisected down to min_interval; a swap
    // that survives is a crossing too sharp to resolve and is passed
    // diabatically.
    struct Label {
        std::vector<int> state;
        std::vector<double> sign;
    };
    std::map<double, Label> labels;
    auto track = [&](double& worst) {
        std::vector<double> insert;
        worst = 1.0;
        labels.clear();
        const PointResult* prev = nullptr;
        const Label* prev_label = nullptr;
        for (auto& [rho, p] : points) {
            Label l;
            if (!prev) {
                for (int j = 0; j < n; ++j) {
                    l.state.push_back(j);
                    l.sign.push_back(1.0);
                }
            } else {
                const int m = static_cast<int>(p.vectors.cols());
                RealMatrix S(n, m);
                Eigen::MatrixXd u(p.vectors.rows(), n);
                for (int j = 0; j < n; ++j)
                    u.col(j) = prev_label->sign[static_cast<std::size_t>(j)] *
                               prev->mesh.transfer(
                                   prev->vectors.col(prev_label->state[static_cast<std::size_t>(j)]).cast<double>(),
                                   p.mesh);
                S = u.transpose() * p.weighted.cast<double>();
                l.state = match_states(S);
                bool coarse = false;
                for (int j = 0; j < n; ++j) {
                    const double o = S(j, l.state[static_cast<std::size_t>(j)]);
                    l.sign.push_back(o < 0.0 ? -1.0 : 1.0);
                    worst = std::min(worst, std::abs(o));
                    coarse = coarse || std::abs(o) < std::cos(options.max_rotation) ||
                             l.state[static_cast<std::size_t>(j)] != j;
                }
                if (coarse && rho - prev->rho > options.min_interval * rho)
                    insert.push_back(0.5 * (prev->rho + rho));
            }
            prev = &p;
            prev_label = &labels.emplace(rho, std::move(l)).first->second;
        }
        return insert;
    };

    compute(rho_grid);
    double worst = 1.0;
    std::vector<double> insert = track(worst);
    for (int pass = 0; pass < options.refine_passes && !insert.empty(); ++pass) {
        compute(insert);
        insert = track(worst);
    }
    require(worst > 0.5, ErrorKind::Tracking,
            "adiabatic basis overlap between neighboring hyperradii fell to " + std::to_string(worst));

    AdiabaticSolution sol;
    sol.min_overlap = worst;
    sol.terms.resize(static_cast<Eigen::Index>(points.size()), n);
    int row = 0;
    for (const auto& [rho, p] : points) {
        const Label& l = labels.at(rho);
        RealMatrix H(n, n), Q(n, n);
        for (int j = 0; j < n; ++j) {
            const int a = l.state[static_cast<std::size_t>(j)];
            require(p.valid[static_cast<std::size_t>(a)], ErrorKind::Tracking,
                    "term " + std::to_string(j + 1) + " changes character within the derivative step at rho = " +
                        std::to_string(rho));
            sol.terms(row, j) = p.energies(a);
            for (int k = 0; k < n; ++k) {
                const int b = l.state[static_cast<std::size_t>(k)];
                const double s = l.sign[static_cast<std::size_t>(j)] * l.sign[static_cast<std::size_t>(k)];
                H(j, k) = s * p.H(a, b);
                Q(j, k) = s * p.Q(a, b);
            }
        }
        sol.rho.push_back(rho);
        sol.H.push_back(std::move(H));
        sol.Q.push_back(std::move(Q));
        ++row;
    }
    return sol;
}

AdiabaticCouplings::AdiabaticCouplings(const AdiabaticSolution& solution, int channels)
    : n_(channels > 0 ? channels : solution.n_terms()), rho_(solution.rho)
{
    const int np = static_cast<int>(rho_.size());
    require(np >= 2 && static_cast<int>(solution.H.size()) == np && static_cast<int>(solution.Q.size()) == np &&
                solution.terms.rows() == np,
            ErrorKind::Validation, "inconsistent coupling tables");
    require(n_ <= solution.n_terms(), ErrorKind::Validation, "more channels requested than terms computed");
    const int per = n_ + 2 * n_ * n_;
    values_.resize(np, per);
    std::vector<double> x(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i) {
        require(rho_[static_cast<std::size_t>(i)] > 0.0 && (i == 0 || rho_[static_cast<std::size_t>(i)] >
                                                                           rho_[static_cast<std::size_t>(i - 1)]),
                ErrorKind::Validation, "coupling table hyperradii must increase");
        x[static_cast<std::size_t>(i)] = std::log(rho_[static_cast<std::size_t>(i)]);
        values_.row(i).head(n_) = solution.terms.row(i).head(n_);
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b) {
                values_(i, n_ + a * n_ + b) = solution.H[static_cast<std::size_t>(i)](a, b);
                values_(i, n_ + n_ * n_ + a * n_ + b) = solution.Q[static_cast<std::size_t>(i)](a, b);
            }
    }
    second_ = spline_second(x, values_);
    rho_ = std::move(x); // stored as log rho
}

void AdiabaticCouplings::evaluate(double rho, RealMatrix& W, RealMatrix& Q) const
{
    const double x = std::log(rho);
    const double eps = 1e-12;
    require(x >= rho_.front() - eps && x <= rho_.back() + eps, ErrorKind::Domain,
            "hyperradius " + std::to_string(rho) + " outside the coupling table");
    const auto it = std::upper_bound(rho_.begin(), rho_.end(), x);
    const int i = std::clamp(static_cast<int>(it - rho_.begin()) - 1, 0, static_cast<int>(rho_.size()) - 2);
    const double x0 = rho_[static_cast<std::size_t>(i)], x1 = rho_[static_cast<std::size_t>(i + 1)], h = x1 - x0;
    const double a = (x1 - x) / h, b = (x - x0) / h;
    const Eigen::RowVectorXd v = a * values_.row(i) + b * values_.row(i + 1) +
                                 ((a * a * a - a) * second_.row(i) + (b * b * b - b) * second_.row(i + 1)) * (h * h / 6.0);
    W.resize(n_, n_);
    Q.resize(n_, n_);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) {
            W(r, c) = v(n_ + r * n_ + c);
            Q(r, c) = v(n_ + n_ * n_ + r * n_ + c);
        }
    W = 0.5 * (W + W.transpose()).eval();
    W.diagonal() += v.head(n_).transpose();
    W.diagonal().array() += 3.75 / (rho * rho);
}

double AdiabaticCouplings::rho_min() const { return std::exp(rho_.front()); }

double AdiabaticCouplings::rho_max() const { return std::exp(rho_.back()); }

ChannelSet atomic_channels(const ThreeBodyMasses& masses)
{
    masses.validate();
    std::vector<std::pair<double, double>> ch = {{masses.atomic_level(1, 1), masses.channel_reduced_mass(1)},
                                                 {masses.atomic_level(2, 1), masses.channel_reduced_mass(2)}};
    std::sort(ch.begin(), ch.end());
    return ChannelSet({ch[0].first, ch[1].first}, {ch[0].second, ch[1].second});
}

} // namespace hsres
