#include "detref/nn.hpp"

#include "detref/rng.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace detref::nn {

int ParamStore::add(const std::string& name, int rows, int cols, int fan_in,
                    std::uint64_t global_seed) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    Entry e;
    e.name = name;
    e.value = Mat::Zero(rows, cols);
    e.grad = Mat::Zero(rows, cols);
    if (fan_in > 0) {
        const double bound = std::sqrt(1.0 / fan_in);
        Rng rng(mix_u64(global_seed, fnv1a(name)));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) e.value(r, c) = rng.uniform(-bound, bound);
    }
    const int id = static_cast<int>(entries_.size());
    entries_.push_back(std::move(e));
    index_.emplace(name, id);
    return id;
}

int ParamStore::find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& e : entries_) e.grad.setZero();
}

int Tape::push(Mat value, std::function<void(Tape&, const Mat&)> back) {
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::grad_buf(int id) {
    Node& n = nodes_[id];
    if (!n.touched) {
        n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.touched = true;
    }
    return n.grad;
}

void Tape::accumulate(int id, const Mat& g) { grad_buf(id) += g; }

Mat Tape::grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.touched) return n.grad;
    return Mat::Zero(n.value.rows(), n.value.cols());
}

void Tape::backward(Var out) {
    backward(out, Mat::Ones(nodes_[out.id].value.rows(), nodes_[out.id].value.cols()));
}

void Tape::backward(Var out, const Mat& seed) {
    if (seed.rows() != nodes_[out.id].value.rows() || seed.cols() != nodes_[out.id].value.cols())
        throw std::invalid_argument("Tape::backward: seed shape mismatch");
    accumulate(out.id, seed);
    for (int id = out.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.touched || !n.back) continue;
        n.back(*this, n.grad);
    }
}

Var Tape::constant(Mat v) { return {push(std::move(v), nullptr)}; }

Var Tape::scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

Var Tape::param(ParamStore& store, const std::string& name) {
    const int idx = store.find(name);
    ParamStore* sp = &store;
    return {push(store.entries()[idx].value,
                 [sp, idx](Tape&, const Mat& g) { sp->entries()[idx].grad += g; })};
}

Var Tape::matmul(Var a, Var b) {
    const Mat& av = nodes_[a.id].value;
    const Mat& bv = nodes_[b.id].value;
    if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    const int ai = a.id, bi = b.id;
    return {push(av * bv, [ai, bi](Tape& t, const Mat& g) {
        t.accumulate(ai, g * t.nodes_[bi].value.transpose());
        t.accumulate(bi, t.nodes_[ai].value.transpose() * g);
    })};
}

Var Tape::add(Var a, Var b) {
    const Mat& av = nodes_[a.id].value;
    const Mat& bv = nodes_[b.id].value;
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
        throw std::invalid_argument("add: shape mismatch");
    const int ai = a.id, bi = b.id;
    return {push(av + bv, [ai, bi](Tape& t, const Mat& g) {
        t.accumulate(ai, g);
        t.accumulate(bi, g);
    })};
}

Var Tape::sub(Var a, Var b) {
    const Mat& av = nodes_[a.id].value;
    const Mat& bv = nodes_[b.id].value;
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
        throw std::invalid_argument("sub: shape mismatch");
    const int ai = a.id, bi = b.id;
    return {push(av - bv, [ai, bi](Tape& t, const Mat& g) {
        t.accumulate(ai, g);
        t.accumulate(bi, -g);
    })};
}

Var Tape::add_rowvec(Var x, Var b) {
    const Mat& xv = nodes_[x.id].value;
    const Mat& bv = nodes_[b.id].value;
    if (bv.rows() != 1 || bv.cols() != xv.cols())
        throw std::invalid_argument("add_rowvec: bias must be 1 x cols(x)");
    Mat out = xv;
    out.rowwise() += bv.row(0);
    const int xi = x.id, bi = b.id;
    return {push(std::move(out), [xi, bi](Tape& t, const Mat& g) {
        t.accumulate(xi, g);
        t.accumulate(bi, g.colwise().sum());
    })};
}

Var Tape::scale(Var a, double s) {
    const int ai = a.id;
    return {push(nodes_[a.id].value * s,
                 [ai, s](Tape& t, const Mat& g) { t.accumulate(ai, g * s); })};
}

Var Tape::cmul(Var a, Var b) {
    const Mat& av = nodes_[a.id].value;
    const Mat& bv = nodes_[b.id].value;
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
        throw std::invalid_argument("cmul: shape mismatch");
    const int ai = a.id, bi = b.id;
    return {push(av.cwiseProduct(bv), [ai, bi](Tape& t, const Mat& g) {
        t.accumulate(ai, g.cwiseProduct(t.nodes_[bi].value));
        t.accumulate(bi, g.cwiseProduct(t.nodes_[ai].value));
    })};
}

Var Tape::relu(Var a) {
    const int ai = a.id;
    return {push(nodes_[a.id].value.cwiseMax(0.0), [ai](Tape& t, const Mat& g) {
        const Mat& x = t.nodes_[ai].value;
        t.accumulate(ai, (x.array() > 0.0).cast<double>().matrix().cwiseProduct(g));
    })};
}

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var Tape::sigmoid(Var a) {
    Mat out = nodes_[a.id].value.unaryExpr([](double x) { return stable_sigmoid(x); });
    const int ai = a.id;
    const int self = push(std::move(out), nullptr);
    nodes_[self].back = [ai, self](Tape& t, const Mat& g) {
        const Mat& y = t.nodes_[self].value;
        t.accumulate(ai, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
    };
    return {self};
}

Var Tape::exp(Var a) {
    const int ai = a.id;
    const int self = push(nodes_[a.id].value.array().exp().matrix(), nullptr);
    nodes_[self].back = [ai, self](Tape& t, const Mat& g) {
        t.accumulate(ai, g.cwiseProduct(t.nodes_[self].value));
    };
    return {self};
}

Var Tape::sin(Var a) {
    const int ai = a.id;
    return {push(nodes_[a.id].value.array().sin().matrix(), [ai](Tape& t, const Mat& g) {
        t.accumulate(ai, g.cwiseProduct(t.nodes_[ai].value.array().cos().matrix()));
    })};
}

Var Tape::cos(Var a) {
    const int ai = a.id;
    return {push(nodes_[a.id].value.array().cos().matrix(), [ai](Tape& t, const Mat& g) {
        t.accumulate(ai, -g.cwiseProduct(t.nodes_[ai].value.array().sin().matrix()));
    })};
}

Var Tape::transpose(Var a) {
    const int ai = a.id;
    return {push(nodes_[a.id].value.transpose(),
                 [ai](Tape& t, const Mat& g) { t.accumulate(ai, g.transpose()); })};
}

Var Tape::concat_cols(Var a, Var b) {
    const Mat& av = nodes_[a.id].value;
    const Mat& bv = nodes_[b.id].value;
    if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    Mat out(av.rows(), av.cols() + bv.cols());
    out.leftCols(av.cols()) = av;
    out.rightCols(bv.cols()) = bv;
    const int ai = a.id, bi = b.id;
    const int ac = static_cast<int>(av.cols()), bc = static_cast<int>(bv.cols());
    return {push(std::move(out), [ai, bi, ac, bc](Tape& t, const Mat& g) {
        t.accumulate(ai, g.leftCols(ac));
        t.accumulate(bi, g.rightCols(bc));
    })};
}

Var Tape::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    Eigen::Index rows = 0;
    const Eigen::Index cols = nodes_[parts[0].id].value.cols();
    for (const Var p : parts) {
        if (nodes_[p.id].value.cols() != cols)
            throw std::invalid_argument("concat_rows: column mismatch");
        rows += nodes_[p.id].value.rows();
    }
    Mat out(rows, cols);
    std::vector<int> ids;
    std::vector<int> row_counts;
    ids.reserve(parts.size());
    row_counts.reserve(parts.size());
    Eigen::Index at = 0;
    for (const Var p : parts) {
        const Mat& v = nodes_[p.id].value;
        out.middleRows(at, v.rows()) = v;
        at += v.rows();
        ids.push_back(p.id);
        row_counts.push_back(static_cast<int>(v.rows()));
    }
    return {push(std::move(out),
                 [ids = std::move(ids), row_counts = std::move(row_counts)](Tape& t, const Mat& g) {
                     int at = 0;
                     for (std::size_t k = 0; k < ids.size(); ++k) {
                         t.accumulate(ids[k], g.middleRows(at, row_counts[k]));
                         at += row_counts[k];
                     }
                 })};
}

Var Tape::slice_cols(Var a, int start, int len) {
    const Mat& av = nodes_[a.id].value;
    if (start < 0 || len <= 0 || start + len > av.cols())
        throw std::invalid_argument("slice_cols: out of range");
    const int ai = a.id;
    return {push(av.middleCols(start, len), [ai, start, len](Tape& t, const Mat& g) {
        Mat& buf = t.grad_buf(ai);
        buf.middleCols(start, len) += g;
    })};
}

Var Tape::gather_rows(Var x, std::vector<int> idx) {
    const Mat& xv = nodes_[x.id].value;
    Mat out = Mat::Zero(static_cast<Eigen::Index>(idx.size()), xv.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= 0) {
            if (idx[k] >= xv.rows()) throw std::invalid_argument("gather_rows: index out of range");
            out.row(static_cast<Eigen::Index>(k)) = xv.row(idx[k]);
        }
    }
    const int xi = x.id;
    return {push(std::move(out), [xi, idx = std::move(idx)](Tape& t, const Mat& g) {
        Mat& buf = t.grad_buf(xi);
        for (std::size_t k = 0; k < idx.size(); ++k)
            if (idx[k] >= 0) buf.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    })};
}

Var Tape::row_max(Var x) {
    const Mat& xv = nodes_[x.id].value;
    Mat out(xv.rows(), 1);
    std::vector<int> arg(static_cast<std::size_t>(xv.rows()), 0);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        int best = 0;
        for (Eigen::Index c = 1; c < xv.cols(); ++c)
            if (xv(r, c) > xv(r, best)) best = static_cast<int>(c);
        arg[static_cast<std::size_t>(r)] = best;
        out(r, 0) = xv(r, best);
    }
    const int xi = x.id;
    return {push(std::move(out), [xi, arg = std::move(arg)](Tape& t, const Mat& g) {
        Mat& buf = t.grad_buf(xi);
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            buf(r, arg[static_cast<std::size_t>(r)]) += g(r, 0);
    })};
}

Var Tape::col_max(Var x) {
    const Mat& xv = nodes_[x.id].value;
    Mat out(1, xv.cols());
    std::vector<int> arg(static_cast<std::size_t>(xv.cols()), 0);
    for (Eigen::Index c = 0; c < xv.cols(); ++c) {
        int best = 0;
        for (Eigen::Index r = 1; r < xv.rows(); ++r)
            if (xv(r, c) > xv(best, c)) best = static_cast<int>(r);
        arg[static_cast<std::size_t>(c)] = best;
        out(0, c) = xv(best, c);
    }
    const int xi = x.id;
    return {push(std::move(out), [xi, arg = std::move(arg)](Tape& t, const Mat& g) {
        Mat& buf = t.grad_buf(xi);
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            buf(arg[static_cast<std::size_t>(c)], c) += g(0, c);
    })};
}

Var Tape::group_row_max(Var x, int groups) {
    const Mat& xv = nodes_[x.id].value;
    if (groups <= 0 || xv.rows() % groups != 0)
        throw std::invalid_argument("group_row_max: rows not divisible by groups");
    const int m = static_cast<int>(xv.rows()) / groups;
    Mat out(groups, xv.cols());
    std::vector<int> arg(static_cast<std::size_t>(groups) * static_cast<std::size_t>(xv.cols()));
    for (int gidx = 0; gidx < groups; ++gidx) {
        for (Eigen::Index c = 0; c < xv.cols(); ++c) {
            int best = gidx * m;
            for (int r = gidx * m + 1; r < (gidx + 1) * m; ++r)
                if (xv(r, c) > xv(best, c)) best = r;
            arg[static_cast<std::size_t>(gidx) * xv.cols() + static_cast<std::size_t>(c)] = best;
            out(gidx, c) = xv(best, c);
        }
    }
    const int xi = x.id;
    return {push(std::move(out), [xi, arg = std::move(arg)](Tape& t, const Mat& g) {
        Mat& buf = t.grad_buf(xi);
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            for (Eigen::Index c = 0; c < g.cols(); ++c)
                buf(arg[static_cast<std::size_t>(r) * g.cols() + static_cast<std::size_t>(c)], c) +=
                    g(r, c);
    })};
}

Var Tape::sum_rows(Var x) {
    const int xi = x.id;
    const Mat& xv = nodes_[x.id].value;
    const int rows = static_cast<int>(xv.rows());
    return {push(xv.colwise().sum(), [xi, rows](Tape& t, const Mat& g) {
        t.accumulate(xi, g.replicate(rows, 1));
    })};
}

Var Tape::sum_all(Var x) {
    const int xi = x.id;
    const Mat& xv = nodes_[x.id].value;
    Mat out(1, 1);
    out(0, 0) = xv.sum();
    const int rows = static_cast<int>(xv.rows());
    const int cols = static_cast<int>(xv.cols());
    return {push(std::move(out), [xi, rows, cols](Tape& t, const Mat& g) {
        t.accumulate(xi, Mat::Constant(rows, cols, g(0, 0)));
    })};
}

Var Tape::reshape_row(Var x) {
    const Mat& xv = nodes_[x.id].value;
    const int rows = static_cast<int>(xv.rows());
    const int cols = static_cast<int>(xv.cols());
    Mat out(1, rows * cols);
    // Mat is row-major, so the flat data already walks rows first.
    std::memcpy(out.data(), xv.data(), sizeof(double) * static_cast<std::size_t>(rows * cols));
    const int xi = x.id;
    return {push(std::move(out), [xi, rows, cols](Tape& t, const Mat& g) {
        Mat back(rows, cols);
        std::memcpy(back.data(), g.data(), sizeof(double) * static_cast<std::size_t>(rows * cols));
        t.accumulate(xi, back);
    })};
}

Var Tape::rows_l2norm(Var x) {
    const Mat& xv = nodes_[x.id].value;
    Mat out(xv.rows(), 1);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) out(r, 0) = xv.row(r).norm();
    const int xi = x.id;
    const int self = push(std::move(out), nullptr);
    nodes_[self].back = [xi, self](Tape& t, const Mat& g) {
        const Mat& x = t.nodes_[xi].value;
        const Mat& n = t.nodes_[self].value;
        Mat& buf = t.grad_buf(xi);
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            if (n(r, 0) > 0.0) buf.row(r) += (g(r, 0) / n(r, 0)) * x.row(r);
    };
    return {self};
}

Var Tape::smooth_l1(Var pred, Mat target) {
    const Mat& pv = nodes_[pred.id].value;
    if (pv.rows() != target.rows() || pv.cols() != target.cols())
        throw std::invalid_argument("smooth_l1: shape mismatch");
    Mat out = (pv - target).unaryExpr([](double d) {
        const double a = std::abs(d);
        return a < 1.0 ? 0.5 * d * d : a - 0.5;
    });
    const int pi = pred.id;
    return {push(std::move(out), [pi, target = std::move(target)](Tape& t, const Mat& g) {
        const Mat d = t.nodes_[pi].value - target;
        t.accumulate(pi, g.cwiseProduct(d.unaryExpr([](double x) {
            return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
        })));
    })};
}

Var Tape::bce_with_logits(Var logit, Mat target) {
    const Mat& zv = nodes_[logit.id].value;
    if (zv.rows() != target.rows() || zv.cols() != target.cols())
        throw std::invalid_argument("bce_with_logits: shape mismatch");
    Mat out(zv.rows(), zv.cols());
    for (Eigen::Index r = 0; r < zv.rows(); ++r)
        for (Eigen::Index c = 0; c < zv.cols(); ++c) {
            const double z = zv(r, c);
            out(r, c) = std::max(z, 0.0) - z * target(r, c) + std::log1p(std::exp(-std::abs(z)));
        }
    const int zi = logit.id;
    return {push(std::move(out), [zi, target = std::move(target)](Tape& t, const Mat& g) {
        const Mat& z = t.nodes_[zi].value;
        Mat d(z.rows(), z.cols());
        for (Eigen::Index r = 0; r < z.rows(); ++r)
            for (Eigen::Index c = 0; c < z.cols(); ++c)
                d(r, c) = stable_sigmoid(z(r, c)) - target(r, c);
        t.accumulate(zi, g.cwiseProduct(d));
    })};
}

void register_mlp(ParamStore& store, const std::string& prefix, int in,
                  std::span<const int> widths, std::uint64_t global_seed) {
    if (widths.empty()) throw std::invalid_argument("register_mlp: widths must be non-empty");
    int d = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::string layer = prefix + "." + std::to_string(i);
        store.add(layer + ".W", d, widths[i], d, global_seed);
        store.add(layer + ".b", 1, widths[i], 0, global_seed);
        d = widths[i];
    }
}

Var mlp_forward(Tape& tape, ParamStore& store, const std::string& prefix, Var x,
                std::span<const int> widths, Act out_act) {
    if (widths.empty()) throw std::invalid_argument("mlp_forward: widths must be non-empty");
    Var h = x;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::string layer = prefix + "." + std::to_string(i);
        const Var w = tape.param(store, layer + ".W");
        const Var b = tape.param(store, layer + ".b");
        h = tape.add_rowvec(tape.matmul(h, w), b);
        const bool last = i + 1 == widths.size();
        const Act act = last ? out_act : Act::relu;
        if (act == Act::relu)
            h = tape.relu(h);
        else if (act == Act::sigmoid)
            h = tape.sigmoid(h);
    }
    return h;
}

void OptimState::init(const ParamStore& store) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& e : store.entries()) {
        m.push_back(Mat::Zero(e.value.rows(), e.value.cols()));
        v.push_back(Mat::Zero(e.value.rows(), e.value.cols()));
    }
}

void adam_step(ParamStore& store, OptimState& opt) {
    if (opt.m.size() != store.size()) throw std::invalid_argument("adam_step: state not initialized");
    opt.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& e = store.entries()[i];
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * e.grad;
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * e.grad.cwiseProduct(e.grad);
        const Mat mhat = opt.m[i] / bc1;
        const Mat vhat = opt.v[i] / bc2;
        e.value -=
            opt.lr * mhat.cwiseQuotient((vhat.array().sqrt() + opt.eps).matrix());
        e.grad.setZero();
    }
}

double finite_diff_check(const std::function<double(ParamStore&)>& loss_fn, ParamStore& store,
                         double eps) {
    store.zero_grads();
    loss_fn(store);
    std::vector<Mat> analytic;
    analytic.reserve(store.size());
    for (const auto& e : store.entries()) analytic.push_back(e.grad);

    double worst = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        Mat& value = store.entries()[i].value;
        for (Eigen::Index r = 0; r < value.rows(); ++r) {
            for (Eigen::Index c = 0; c < value.cols(); ++c) {
                const double saved = value(r, c);
                value(r, c) = saved + eps;
                store.zero_grads();
                const double up = loss_fn(store);
                value(r, c) = saved - eps;
                store.zero_grads();
                const double dn = loss_fn(store);
                value(r, c) = saved;
                const double central = (up - dn) / (2.0 * eps);
                const double a = analytic[i](r, c);
                const double rel =
                    std::abs(a - central) / std::max(1e-8, std::abs(a) + std::abs(central));
                worst = std::max(worst, rel);
            }
        }
    }
    store.zero_grads();
    return worst;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, std::uint64_t global_seed,
                     std::uint32_t version) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    write_pod(out, version);
    write_pod(out, global_seed);
    write_pod(out, static_cast<std::uint64_t>(store.size()));
    for (const auto& e : store.entries()) {
        write_pod(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod(out, static_cast<std::uint32_t>(2));
        write_pod(out, static_cast<std::uint64_t>(e.value.rows()));
        write_pod(out, static_cast<std::uint64_t>(e.value.cols()));
        out.write(reinterpret_cast<const char*>(e.value.data()),
                  static_cast<std::streamsize>(sizeof(double) * e.value.size()));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::uint64_t load_checkpoint(const std::string& path, ParamStore& store) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
    const auto seed = read_pod<std::uint64_t>(in);
    const auto count = read_pod<std::uint64_t>(in);
    if (count != store.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& e : store.entries()) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (name != e.name) throw std::runtime_error("checkpoint: parameter order mismatch at " + name);
        const auto rank = read_pod<std::uint32_t>(in);
        if (rank != 2) throw std::runtime_error("checkpoint: unsupported rank");
        const auto rows = read_pod<std::uint64_t>(in);
        const auto cols = read_pod<std::uint64_t>(in);
        if (rows != static_cast<std::uint64_t>(e.value.rows()) ||
            cols != static_cast<std::uint64_t>(e.value.cols()))
            throw std::runtime_error("checkpoint: shape mismatch for " + e.name);
        in.read(reinterpret_cast<char*>(e.value.data()),
                static_cast<std::streamsize>(sizeof(double) * e.value.size()));
        if (!in) throw std::runtime_error("checkpoint: truncated values for " + e.name);
    }
    return seed;
}

bool checkpoint_exists(const std::string& path) { return std::filesystem::exists(path); }

}  // namespace detref::nn
