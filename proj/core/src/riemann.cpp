#include "geoalign/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "geoalign/errors.hpp"

namespace geoalign {

std::vector<Eigen::MatrixXd> MetricSource::metric_batch(const Eigen::MatrixXd& z) const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index c = 0; c < z.cols(); ++c) out.push_back(metric(z.col(c)));
    return out;
}

Eigen::VectorXd MetricSource::quadratic_forms(const Eigen::MatrixXd& z,
                                              const Eigen::MatrixXd& v) const {
    Eigen::VectorXd s(z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const Eigen::VectorXd vc = v.col(c);
        s[c] = vc.dot(metric(z.col(c)) * vc);
    }
    return s;
}

void QuadformBatch::add(const Eigen::VectorXd& z, const Eigen::VectorXd& v, double c) {
    points.push_back(z);
    directions.push_back(v);
    coefficients.push_back(c);
}

// ---------------------------------------------------------------------------

DecoderMetric::DecoderMetric(const Mlp& mean_head, const Mlp& logvar_head)
    : mu_(mean_head), lv_(logvar_head) {
    if (mu_.input_dim() != lv_.input_dim() || mu_.output_dim() != lv_.output_dim())
        throw ValidationError("decoder heads must share input and output dimensions");
}

Eigen::MatrixXd DecoderMetric::metric(const Eigen::VectorXd& z) const {
    return metric_batch(Eigen::MatrixXd(z)).front();
}

std::vector<Eigen::MatrixXd> DecoderMetric::metric_batch(const Eigen::MatrixXd& z) const {
    const Eigen::Index d = z.rows();
    const Eigen::Index B = z.cols();
    std::vector<Eigen::MatrixXd> jm(static_cast<std::size_t>(d));
    std::vector<Eigen::MatrixXd> js(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) {
        Eigen::MatrixXd dir = Eigen::MatrixXd::Zero(d, B);
        dir.row(k).setOnes();
        const TangentTape tm = mu_.tangent_forward(z, dir);
        const TangentTape tl = lv_.tangent_forward(z, dir);
        jm[k] = tm.output_tangent;
        js[k] = (0.5 * (0.5 * tl.output.array()).exp() * tl.output_tangent.array()).matrix();
    }
    std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(B), Eigen::MatrixXd(d, d));
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = a; b < d; ++b) {
            const Eigen::RowVectorXd e = (jm[a].array() * jm[b].array()).colwise().sum() +
                                         (js[a].array() * js[b].array()).colwise().sum();
            for (Eigen::Index c = 0; c < B; ++c) {
                out[c](a, b) = e[c];
                out[c](b, a) = e[c];
            }
        }
    }
    return out;
}

Eigen::VectorXd DecoderMetric::quadratic_forms(const Eigen::MatrixXd& z,
                                               const Eigen::MatrixXd& v) const {
    const TangentTape tm = mu_.tangent_forward(z, v);
    const TangentTape tl = lv_.tangent_forward(z, v);
    const Eigen::ArrayXXd sd = 0.5 * (0.5 * tl.output.array()).exp() * tl.output_tangent.array();
    return (tm.output_tangent.array().square().colwise().sum() + sd.square().colwise().sum())
        .transpose();
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> DecoderMetric::jacobians(
    const Eigen::VectorXd& z) const {
    Eigen::MatrixXd jm = mu_.input_jacobian(z);
    Eigen::MatrixXd jl = lv_.input_jacobian(z);
    const Eigen::VectorXd half_sigma = 0.5 * (0.5 * lv_.evaluate(z).array()).exp();
    Eigen::MatrixXd js = half_sigma.asDiagonal() * jl;
    return {std::move(jm), std::move(js)};
}

void DecoderMetric::accumulate_gradient(const QuadformBatch& batch, MlpGradient& grad_mu,
                                        MlpGradient& grad_logvar) const {
    constexpr std::size_t kChunk = 4096;
    const Eigen::Index d = dim();
    for (std::size_t start = 0; start < batch.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, batch.size() - start);
        Eigen::MatrixXd z(d, static_cast<Eigen::Index>(n));
        Eigen::MatrixXd v(d, static_cast<Eigen::Index>(n));
        Eigen::RowVectorXd c(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            const auto col = static_cast<Eigen::Index>(k);
            z.col(col) = batch.points[start + k];
            v.col(col) = batch.directions[start + k];
            c[col] = batch.coefficients[start + k];
        }
        const TangentTape tm = mu_.tangent_forward(z, v);
        const TangentTape tl = lv_.tangent_forward(z, v);

        // c * |Jmu v|^2
        const Eigen::MatrixXd mu_dot_bar =
            (2.0 * tm.output_tangent.array()).rowwise() * c.array();
        mu_.tangent_backward(tm, Eigen::MatrixXd::Zero(tm.output.rows(), tm.output.cols()),
                             mu_dot_bar, grad_mu);

        // c * |sigma_dot|^2 with sigma = exp(l/2), sigma_dot = sigma/2 * l_dot
        const Eigen::ArrayXXd half_sigma = 0.5 * (0.5 * tl.output.array()).exp();
        const Eigen::ArrayXXd ldot = tl.output_tangent.array();
        const Eigen::ArrayXXd sdot = half_sigma * ldot;
        const Eigen::ArrayXXd sdot_bar = (2.0 * sdot).rowwise() * c.array();
        const Eigen::MatrixXd ldot_bar = (sdot_bar * half_sigma).matrix();
        const Eigen::ArrayXXd sigma_bar = sdot_bar * 0.5 * ldot;
        const Eigen::MatrixXd l_bar = (sigma_bar * half_sigma).matrix();
        lv_.tangent_backward(tl, l_bar, ldot_bar, grad_logvar);
    }
}

Eigen::MatrixXd pullback_metric(const Mlp& mean_head, const Mlp& logvar_head,
                                const Eigen::VectorXd& z) {
    return DecoderMetric(mean_head, logvar_head).metric(z);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Connectivity c) {
    return c == Connectivity::Axis ? "axis" : "axis+diagonal";
}

Connectivity connectivity_from_string(std::string_view s) {
    if (s == "axis") return Connectivity::Axis;
    if (s == "axis+diagonal" || s == "diagonal") return Connectivity::AxisDiagonal;
    throw ValidationError("unknown connectivity '" + std::string(s) + "'");
}

GridBounds GridBounds::around(const Eigen::MatrixXd& codes, double expand) {
    if (codes.rows() == 0) throw ValidationError("grid bounds: no codes");
    GridBounds b;
    const Eigen::VectorXd lo = codes.colwise().minCoeff().transpose();
    const Eigen::VectorXd hi = codes.colwise().maxCoeff().transpose();
    Eigen::VectorXd range = hi - lo;
    for (Eigen::Index k = 0; k < range.size(); ++k)
        if (!(range[k] > 0.0)) range[k] = 1.0;
    b.lower = lo - expand * range;
    b.upper = hi + expand * range;
    return b;
}

MetricField MetricField::build(const MetricSource& metric, const GridBounds& bounds,
                               int resolution, Connectivity connectivity) {
    const int d = metric.dim();
    if (d > kMaxGridDim) {
        std::ostringstream os;
        os << "grid geodesics support latent dimension <= " << kMaxGridDim << " (got " << d
           << "); use the linear estimator instead";
        throw ValidationError(os.str());
    }
    if (d < 1) throw ValidationError("metric field: latent dimension must be >= 1");
    if (resolution < 2) throw ValidationError("metric field: resolution P must be >= 2");
    if (bounds.lower.size() != d || bounds.upper.size() != d)
        throw ValidationError("metric field: bounds dimension mismatch");
    for (int k = 0; k < d; ++k)
        if (!(bounds.lower[k] < bounds.upper[k]))
            throw ValidationError("metric field: bounds must satisfy lower < upper");

    MetricField f;
    f.dim_ = d;
    f.resolution_ = resolution;
    f.connectivity_ = connectivity;
    f.bounds_ = bounds;
    f.node_count_ = 1;
    for (int k = 0; k < d; ++k) {
        f.node_count_ *= static_cast<std::size_t>(resolution + 1);
        f.spacing_.push_back((bounds.upper[k] - bounds.lower[k]) / resolution);
    }

    Eigen::MatrixXd positions(d, static_cast<Eigen::Index>(f.node_count_));
    for (std::size_t n = 0; n < f.node_count_; ++n)
        positions.col(static_cast<Eigen::Index>(n)) = f.position(n);

    f.tensors_.assign(f.node_count_ * static_cast<std::size_t>(d * d), 0.0);
    f.min_eig_before_ = std::numeric_limits<double>::infinity();
    constexpr Eigen::Index kChunk = 8192;
    for (Eigen::Index start = 0; start < positions.cols(); start += kChunk) {
        const Eigen::Index n = std::min(kChunk, positions.cols() - start);
        const auto tensors = metric.metric_batch(positions.middleCols(start, n));
        for (Eigen::Index c = 0; c < n; ++c) {
            Eigen::MatrixXd g = 0.5 * (tensors[c] + tensors[c].transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            const double min_eig = es.eigenvalues().minCoeff();
            f.min_eig_before_ = std::min(f.min_eig_before_, min_eig);
            const double floor = kPsdFloor * std::max(g.trace(), 0.0);
            if (min_eig < floor) {
                const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
                g = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
                g = 0.5 * (g + g.transpose()).eval();
            }
            std::copy(g.data(), g.data() + d * d,
                      f.tensors_.begin() + (start + c) * d * d);
        }
    }

    // neighbour offsets: {-1,0,1}^d without the origin; axis mode keeps single-axis moves
    std::vector<int> o(static_cast<std::size_t>(d), -1);
    while (true) {
        const int nonzero = static_cast<int>(std::count_if(o.begin(), o.end(),
                                                           [](int x) { return x != 0; }));
        if (nonzero == 1 || (nonzero > 1 && connectivity == Connectivity::AxisDiagonal)) {
            f.offsets_.push_back(o);
            std::ptrdiff_t idx = 0;
            std::ptrdiff_t stride = 1;
            for (int k = 0; k < d; ++k) {
                idx += o[k] * stride;
                stride *= resolution + 1;
            }
            f.offset_index_.push_back(idx);
        }
        int k = 0;
        while (k < d && o[k] == 1) o[k++] = -1;
        if (k == d) break;
        ++o[k];
    }

    const std::size_t K = f.offsets_.size();
    f.weights_.assign(f.node_count_ * K, -1.0);
    for (std::size_t n = 0; n < f.node_count_; ++n) {
        const auto mi = f.multi_index(n);
        for (std::size_t k = 0; k < K; ++k) {
            bool inside = true;
            for (int a = 0; a < d; ++a) {
                const int t = mi[a] + f.offsets_[k][a];
                if (t < 0 || t > resolution) inside = false;
            }
            if (!inside) continue;
            const std::size_t m = static_cast<std::size_t>(
                static_cast<std::ptrdiff_t>(n) + f.offset_index_[k]);
            f.weights_[n * K + k] = f.compute_edge_weight(n, m);
        }
    }
    return f;
}

std::vector<int> MetricField::multi_index(std::size_t node) const {
    std::vector<int> mi(static_cast<std::size_t>(dim_));
    for (int k = 0; k < dim_; ++k) {
        mi[k] = static_cast<int>(node % static_cast<std::size_t>(resolution_ + 1));
        node /= static_cast<std::size_t>(resolution_ + 1);
    }
    return mi;
}

std::size_t MetricField::node_index(const std::vector<int>& multi) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int k = 0; k < dim_; ++k) {
        if (multi[k] < 0 || multi[k] > resolution_)
            throw ValidationError("grid index out of range");
        idx += static_cast<std::size_t>(multi[k]) * stride;
        stride *= static_cast<std::size_t>(resolution_ + 1);
    }
    return idx;
}

Eigen::VectorXd MetricField::position(std::size_t node) const {
    const auto mi = multi_index(node);
    Eigen::VectorXd p(dim_);
    for (int k = 0; k < dim_; ++k) p[k] = bounds_.lower[k] + mi[k] * spacing_[k];
    return p;
}

Eigen::Map<const Eigen::MatrixXd> MetricField::tensor(std::size_t node) const {
    return {tensors_.data() + node * static_cast<std::size_t>(dim_ * dim_), dim_, dim_};
}

bool MetricField::is_interior(std::size_t node) const {
    const auto mi = multi_index(node);
    return std::all_of(mi.begin(), mi.end(), [&](int k) { return k > 0 && k < resolution_; });
}

std::size_t MetricField::snap(const Eigen::VectorXd& p) const {
    if (p.size() != dim_) throw ValidationError("snap: dimension mismatch");
    std::vector<int> mi(static_cast<std::size_t>(dim_));
    for (int k = 0; k < dim_; ++k) {
        const double tol = 1e-9 * (bounds_.upper[k] - bounds_.lower[k]);
        if (!(p[k] >= bounds_.lower[k] - tol && p[k] <= bounds_.upper[k] + tol)) {
            std::ostringstream os;
            os << "query coordinate " << p[k] << " on axis " << k << " lies outside ["
               << bounds_.lower[k] << ", " << bounds_.upper[k] << "]";
            throw ValidationError(os.str());
        }
        const long r = std::lround((p[k] - bounds_.lower[k]) / spacing_[k]);
        mi[k] = static_cast<int>(std::clamp<long>(r, 0, resolution_));
    }
    return node_index(mi);
}

bool MetricField::are_neighbors(std::size_t i, std::size_t j) const {
    if (i >= node_count_ || j >= node_count_ || i == j) return false;
    const auto a = multi_index(i);
    const auto b = multi_index(j);
    int nonzero = 0;
    for (int k = 0; k < dim_; ++k) {
        const int diff = b[k] - a[k];
        if (diff < -1 || diff > 1) return false;
        if (diff != 0) ++nonzero;
    }
    return nonzero == 1 || connectivity_ == Connectivity::AxisDiagonal;
}

double MetricField::compute_edge_weight(std::size_t i, std::size_t j) const {
    const auto a = multi_index(i);
    const auto b = multi_index(j);
    Eigen::VectorXd v(dim_);
    for (int k = 0; k < dim_; ++k) v[k] = (b[k] - a[k]) * spacing_[k];
    const Eigen::MatrixXd g = 0.5 * (tensor(i) + tensor(j));
    return std::sqrt(std::max(0.0, v.dot(g * v)));
}

double MetricField::edge_weight(std::size_t i, std::size_t j) const {
    if (!are_neighbors(i, j)) throw ValidationError("edge_weight: nodes are not grid neighbours");
    return compute_edge_weight(i, j);
}

std::size_t MetricField::edge_count() const {
    std::size_t directed = 0;
    for (double w : weights_)
        if (w >= 0.0) ++directed;
    return directed / 2;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

struct DijkstraRun {
    std::vector<double> dist;
    std::vector<std::size_t> pred;
};

DijkstraRun dijkstra(const MetricField& field, std::size_t source, std::size_t target) {
    const std::size_t n = field.node_count();
    const auto& offs = field.offsets();
    DijkstraRun r;
    r.dist.assign(n, std::numeric_limits<double>::infinity());
    r.pred.assign(n, kNoNode);
    std::vector<char> done(n, 0);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    r.dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [du, u] = heap.top();
        heap.pop();
        if (done[u]) continue;
        done[u] = 1;
        if (u == target) break;
        for (std::size_t k = 0; k < offs.size(); ++k) {
            const double w = field.cached_weight(u, k);
            if (w < 0.0) continue;
            const auto v = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(u) + offs[k]);
            if (done[v]) continue;
            const double nd = du + w;
            if (nd < r.dist[v]) {
                r.dist[v] = nd;
                r.pred[v] = u;
                heap.emplace(nd, v);
            }
        }
    }
    return r;
}

double neighbor_weight(const MetricField& field, std::size_t from, std::size_t to) {
    const auto& offs = field.offsets();
    const auto delta = static_cast<std::ptrdiff_t>(to) - static_cast<std::ptrdiff_t>(from);
    for (std::size_t k = 0; k < offs.size(); ++k)
        if (offs[k] == delta) {
            const double w = field.cached_weight(from, k);
            if (w >= 0.0) return w;
        }
    throw NumericalError("internal: path step between non-neighbouring grid nodes");
}

} // namespace

GeodesicResult geodesic_grid(const MetricField& field, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v) {
    const std::size_t a = field.snap(u);
    const std::size_t b = field.snap(v);
    const std::size_t s = std::min(a, b);
    const std::size_t t = std::max(a, b);

    GeodesicResult res;
    res.differentiable = true;
    if (s == t) {
        res.path = {s};
        return res;
    }
    const DijkstraRun run = dijkstra(field, s, t);
    if (!std::isfinite(run.dist[t]))
        throw NumericalError("internal: grid graph is disconnected");
    for (std::size_t n = t; n != kNoNode; n = run.pred[n]) res.path.push_back(n);
    std::reverse(res.path.begin(), res.path.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < res.path.size(); ++k)
        total += neighbor_weight(field, res.path[k], res.path[k + 1]);
    res.distance = total;
    if (a > b) std::reverse(res.path.begin(), res.path.end());
    return res;
}

std::vector<double> grid_distances_from(const MetricField& field, std::size_t source) {
    if (source >= field.node_count()) throw ValidationError("grid source out of range");
    return dijkstra(field, source, kNoNode).dist;
}

ShortestPathTree grid_shortest_paths(const MetricField& field, std::size_t source) {
    if (source >= field.node_count()) throw ValidationError("grid source out of range");
    DijkstraRun run = dijkstra(field, source, kNoNode);
    return {source, std::move(run.dist), std::move(run.pred)};
}

std::vector<std::size_t> ShortestPathTree::path_to(std::size_t target) const {
    if (target >= dist.size()) throw ValidationError("grid target out of range");
    if (!std::isfinite(dist[target])) throw NumericalError("internal: grid graph is disconnected");
    std::vector<std::size_t> path;
    for (std::size_t n = target; n != kNoNode; n = pred[n]) path.push_back(n);
    std::reverse(path.begin(), path.end());
    return path;
}

void accumulate_path_moments(const MetricField& field, const std::vector<std::size_t>& path,
                             double coef, std::vector<Eigen::MatrixXd>& moments) {
    const int d = field.dim();
    if (moments.size() != field.node_count()) moments.resize(field.node_count());
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const std::size_t p = path[k];
        const std::size_t q = path[k + 1];
        const double w = neighbor_weight(field, p, q);
        if (!(w > 0.0)) continue;
        const auto a = field.multi_index(p);
        const auto b = field.multi_index(q);
        Eigen::VectorXd v(d);
        for (int i = 0; i < d; ++i) v[i] = (b[i] - a[i]) * field.spacing(i);
        // w = sqrt(v^T (g_p + g_q) v / 2)  =>  dw = (dq_p + dq_q) / (4 w)
        const Eigen::MatrixXd m = (coef / (4.0 * w)) * (v * v.transpose());
        for (std::size_t node : {p, q}) {
            if (moments[node].size() == 0) moments[node] = Eigen::MatrixXd::Zero(d, d);
            moments[node] += m;
        }
    }
}

void moments_to_quadforms(const MetricField& field, const std::vector<Eigen::MatrixXd>& moments,
                          QuadformBatch& batch) {
    for (std::size_t n = 0; n < moments.size(); ++n) {
        if (moments[n].size() == 0) continue;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(moments[n]);
        const Eigen::VectorXd z = field.position(n);
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            const double lam = es.eigenvalues()[k];
            if (lam == 0.0) continue;
            batch.add(z, es.eigenvectors().col(k), lam);
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        if (a[k] < b[k]) return true;
        if (a[k] > b[k]) return false;
    }
    return false;
}

struct Segment {
    Eigen::MatrixXd points; // canonical order
    Eigen::VectorXd delta;
    bool swapped = false;
};

Segment segment(const MetricSource& metric, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                int T) {
    if (T < 2) throw ValidationError("linear estimator needs T >= 2");
    if (u.size() != metric.dim() || v.size() != metric.dim())
        throw ValidationError("linear estimator: endpoint dimension mismatch");
    Segment s;
    s.swapped = lexicographically_less(v, u);
    const Eigen::VectorXd& a = s.swapped ? v : u;
    const Eigen::VectorXd& b = s.swapped ? u : v;
    s.delta = b - a;
    s.points.resize(u.size(), T);
    for (int k = 0; k < T; ++k) {
        const double t = static_cast<double>(k) / (T - 1);
        s.points.col(k) = (1.0 - t) * a + t * b;
    }
    return s;
}

} // namespace

GeodesicResult geodesic_linear(const MetricSource& metric, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v, int T) {
    Segment s = segment(metric, u, v, T);
    const Eigen::VectorXd q =
        metric.quadratic_forms(s.points, s.delta.replicate(1, T)).cwiseMax(0.0);
    const double h = 1.0 / (T - 1);
    double total = 0.0;
    for (int k = 0; k < T; ++k) {
        const double wk = (k == 0 || k == T - 1) ? 0.5 : 1.0;
        total += wk * std::sqrt(q[k]);
    }
    GeodesicResult res;
    res.distance = h * total;
    res.points = s.swapped ? Eigen::MatrixXd(s.points.rowwise().reverse()) : s.points;
    res.differentiable = true;
    return res;
}

void accumulate_linear_quadforms(const MetricSource& metric, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& v, int T, double coef,
                                 QuadformBatch& batch) {
    Segment s = segment(metric, u, v, T);
    const Eigen::VectorXd q = metric.quadratic_forms(s.points, s.delta.replicate(1, T));
    const double h = 1.0 / (T - 1);
    for (int k = 0; k < T; ++k) {
        if (!(q[k] > 0.0)) continue;
        const double wk = (k == 0 || k == T - 1) ? 0.5 : 1.0;
        batch.add(s.points.col(k), s.delta, coef * h * wk / (2.0 * std::sqrt(q[k])));
    }
}

// ---------------------------------------------------------------------------

double gaussian_curvature(const MetricField& field, std::size_t node) {
    if (field.dim() != 2) throw ValidationError("gaussian curvature requires a 2-d latent space");
    if (node >= field.node_count() || !field.is_interior(node))
        throw ValidationError("gaussian curvature is defined on interior grid nodes only");
    const auto mi = field.multi_index(node);
    const int i = mi[0];
    const int j = mi[1];
    auto at = [&](int di, int dj) { return field.tensor(field.node_index({i + di, j + dj})); };
    const double hu = field.spacing(0);
    const double hv = field.spacing(1);

    const auto c = at(0, 0);
    const double E = c(0, 0), F = c(0, 1), G = c(1, 1);
    const auto up = at(1, 0), um = at(-1, 0), vp = at(0, 1), vm = at(0, -1);
    const double Eu = (up(0, 0) - um(0, 0)) / (2 * hu);
    const double Ev = (vp(0, 0) - vm(0, 0)) / (2 * hv);
    const double Fu = (up(0, 1) - um(0, 1)) / (2 * hu);
    const double Fv = (vp(0, 1) - vm(0, 1)) / (2 * hv);
    const double Gu = (up(1, 1) - um(1, 1)) / (2 * hu);
    const double Gv = (vp(1, 1) - vm(1, 1)) / (2 * hv);
    const double Evv = (vp(0, 0) - 2 * E + vm(0, 0)) / (hv * hv);
    const double Guu = (up(1, 1) - 2 * G + um(1, 1)) / (hu * hu);
    const double Fuv = (at(1, 1)(0, 1) - at(1, -1)(0, 1) - at(-1, 1)(0, 1) + at(-1, -1)(0, 1)) /
                       (4 * hu * hv);

    Eigen::Matrix3d m1;
    m1 << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
          Fv - 0.5 * Gu, E, F,
          0.5 * Gv, F, G;
    Eigen::Matrix3d m2;
    m2 << 0.0, 0.5 * Ev, 0.5 * Gu,
          0.5 * Ev, E, F,
          0.5 * Gu, F, G;
    const double det = E * G - F * F;
    return (m1.determinant() - m2.determinant()) / (det * det);
}

Eigen::MatrixXd curvature_grid(const MetricField& field) {
    if (field.dim() != 2) throw ValidationError("curvature grid requires a 2-d latent space");
    const int P = field.resolution();
    Eigen::MatrixXd K(P - 1, P - 1);
    for (int j = 1; j < P; ++j)
        for (int i = 1; i < P; ++i) K(j - 1, i - 1) = gaussian_curvature(field, field.node_index({i, j}));
    return K;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Estimator e) { return e == Estimator::Grid ? "grid" : "linear"; }

Estimator estimator_from_string(std::string_view s) {
    if (s == "grid") return Estimator::Grid;
    if (s == "linear") return Estimator::Linear;
    throw ValidationError("unknown estimator '" + std::string(s) + "'");
}

Eigen::MatrixXd pairwise_distances(const MetricSource& metric, const Eigen::MatrixXd& points,
                                   const DistanceOptions& options) {
    const Eigen::Index N = points.rows();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
    if (options.estimator == Estimator::Grid) {
        if (options.field == nullptr)
            throw ValidationError("grid estimator requires a metric field");
        const MetricField& field = *options.field;
        std::vector<std::size_t> snapped(static_cast<std::size_t>(N));
        for (Eigen::Index i = 0; i < N; ++i)
            snapped[i] = field.snap(points.row(i).transpose());
        // each unordered pair is owned by the endpoint with the smaller snapped node
#ifdef GEOALIGN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (Eigen::Index i = 0; i < N; ++i) {
            const std::vector<double> dist = grid_distances_from(field, snapped[i]);
            for (Eigen::Index j = 0; j < N; ++j) {
                if (j == i) continue;
                if (snapped[j] > snapped[i] || (snapped[j] == snapped[i] && j > i)) {
                    const double dij = snapped[j] == snapped[i] ? 0.0 : dist[snapped[j]];
                    D(i, j) = dij;
                    D(j, i) = dij;
                }
            }
        }
        return D;
    }

#ifdef GEOALIGN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = i + 1; j < N; ++j) {
            const double dij = geodesic_linear(metric, points.row(i).transpose(),
                                               points.row(j).transpose(), options.linear_steps)
                                   .distance;
            D(i, j) = dij;
            D(j, i) = dij;
        }
    }
    return D;
}

} // namespace geoalign
