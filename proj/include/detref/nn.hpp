#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace detref::nn {

/// All feature math runs in row-major double matrices: one row per point,
/// perspective, or proposal.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Named parameter arrays with matching gradient buffers. Entry order is
/// insertion order and defines the checkpoint and optimizer layouts.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Mat value;
        Mat grad;
    };

    /// Registers a parameter initialized uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)),
    /// or zero when fan_in == 0 (biases). The draw depends only on
    /// (name, shape, global_seed).
    int add(const std::string& name, int rows, int cols, int fan_in, std::uint64_t global_seed);

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    int find(const std::string& name) const;

    Mat& value(const std::string& name) { return entries_[find(name)].value; }
    const Mat& value(const std::string& name) const { return entries_[find(name)].value; }
    Mat& grad(const std::string& name) { return entries_[find(name)].grad; }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    void zero_grads();

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

/// Handle to a tape node.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over matrix-valued nodes. Build a computation forward,
/// then call backward() once (or more; gradients accumulate) to populate
/// gradients of parameters and intermediates.
class Tape {
public:
    Var constant(Mat v);
    Var scalar(double v);

    /// Leaf bound to a named parameter; backward() adds into the store's grad.
    Var param(ParamStore& store, const std::string& name);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    /// x (n x c) plus a broadcast row vector b (1 x c).
    Var add_rowvec(Var x, Var b);
    Var scale(Var a, double s);
    Var cmul(Var a, Var b);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var exp(Var a);
    Var sin(Var a);
    Var cos(Var a);
    Var transpose(Var a);
    Var concat_cols(Var a, Var b);
    Var concat_rows(std::span<const Var> parts);
    Var slice_cols(Var a, int start, int len);
    /// Gathers rows by index; index -1 produces a zero row.
    Var gather_rows(Var x, std::vector<int> idx);
    /// Max over columns per row: n x c -> n x 1. Ties keep the lowest column.
    Var row_max(Var x);
    /// Max over rows per column: n x c -> 1 x c. Ties keep the lowest row.
    Var col_max(Var x);
    /// Per-group max over rows: (groups*m) x c -> groups x c.
    Var group_row_max(Var x, int groups);
    Var sum_rows(Var x);
    Var sum_all(Var x);
    /// Row-major flatten: n x c -> 1 x (n*c).
    Var reshape_row(Var x);
    /// Euclidean norm of each row: n x c -> n x 1. Subgradient 0 at zero rows.
    Var rows_l2norm(Var x);
    /// Elementwise smooth-L1 (Huber at 1) of (pred - target).
    Var smooth_l1(Var pred, Mat target);
    /// Elementwise binary cross-entropy of sigmoid(logit) against target,
    /// evaluated in the numerically stable logit form.
    Var bce_with_logits(Var logit, Mat target);

    const Mat& val(Var v) const { return nodes_[v.id].value; }
    /// Gradient accumulated so far; zero matrix if the node was never reached.
    Mat grad(Var v) const;

    void backward(Var out);
    void backward(Var out, const Mat& seed);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool touched = false;
        std::function<void(Tape&, const Mat&)> back;  // empty for leaves
    };

    int push(Mat value, std::function<void(Tape&, const Mat&)> back);
    Mat& grad_buf(int id);
    void accumulate(int id, const Mat& g);

    std::vector<Node> nodes_;
    friend class TapeTestPeer;
};

enum class Act { linear, relu, sigmoid };

/// Registers "<prefix>.<i>.W" / "<prefix>.<i>.b" for a stack of dense layers.
void register_mlp(ParamStore& store, const std::string& prefix, int in,
                  std::span<const int> widths, std::uint64_t global_seed);

/// y = act(x * W + b) composed over the registered stack; ReLU between hidden
/// layers, out_act on the last.
Var mlp_forward(Tape& tape, ParamStore& store, const std::string& prefix, Var x,
                std::span<const int> widths, Act out_act);

/// ADAM state: one pair of moment buffers per parameter, in store order.
struct OptimState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<Mat> m;
    std::vector<Mat> v;

    void init(const ParamStore& store);
};

/// Standard ADAM update from the accumulated gradients; zeroes gradients after.
void adam_step(ParamStore& store, OptimState& opt);

/// Central-difference gradient verification. loss_fn must return the scalar
/// loss and, as a side effect of its own backward pass, accumulate parameter
/// gradients. Returns max over parameter elements of
/// |analytic - central| / max(1e-8, |analytic| + |central|).
double finite_diff_check(const std::function<double(ParamStore&)>& loss_fn, ParamStore& store,
                         double eps = 1e-4);

/// Binary checkpoint: version + global seed header, then per-parameter
/// records (name, rank, dims, little-endian doubles). Bit-exact round trip.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     std::uint64_t global_seed, std::uint32_t version = 1);

/// Loads into an existing store; names and shapes must match exactly.
/// Returns the stored global seed.
std::uint64_t load_checkpoint(const std::string& path, ParamStore& store);

bool checkpoint_exists(const std::string& path);

}  // namespace detref::nn
