#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lab/matrix.hpp"
#include "lab/rng.hpp"

namespace lab {

struct Var {
    std::uint64_t tape_id = 0;
    int id = -1;
    int rows = 0;
    int cols = 0;
    bool is_scalar() const { return rows == 1 && cols == 1; }
};

// Reverse-mode tape. Recording is eager: every primitive validates shapes and
// computes its value immediately. backward_grad runs a numeric reverse pass;
// grad_graph records the reverse pass as new nodes on the same tape, which is
// what makes gradients-of-gradients possible.
class Tape {
  public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::uint64_t id() const { return tape_id_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    bool sealed() const { return sealed_; }
    void seal() { sealed_ = true; }

    // leaves
    Var input(const Matrix& value);                                 // differentiable
    Var input(std::span<const double> values, int rows, int cols);
    Var constant(const Matrix& value);                              // not a gradient target
    Var constant(std::span<const double> values, int rows, int cols);
    Var constant_scalar(double value);

    // primitives
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var matvec(Var m, Var x);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var outer(Var u, Var v);
    Var relu(Var a);
    Var step_mask(Var a);  // 1 where input > 0 else 0; derivative defined as 0
    Var sum(Var a);
    Var mean(Var a);
    Var pow_scalar(Var a, double exponent);
    Var sqrt_elem(Var a);
    Var square(Var a);
    Var bias_add(Var m, Var bias);  // bias (d x 1) added to every row of m (B x d)
    Var dot(Var u, Var v);
    Var l2norm(Var a, double eps);      // sqrt(sum a^2 + eps)
    Var row_l2norm(Var a, double eps);  // per-row norms of a B x d matrix
    Var scale(Var a, double factor);
    Var bcast_scalar(Var s, int rows, int cols);
    Var bcast_row(Var v, int n_rows);  // d x 1 -> n_rows x d, every row = v^T
    Var bcast_col(Var v, int n_cols);  // B x 1 -> B x n_cols, every column = v
    Var col_sum(Var m);                // B x d -> d x 1
    Var row_sum(Var m);                // B x d -> B x 1

    // values are cached at record time
    const std::vector<double>& value(Var v) const;
    double scalar_value(Var v) const;
    Matrix value_matrix(Var v) const;

    // requires a sealed tape
    std::vector<double> forward_eval(Var output) const;

    // numeric reverse pass from a scalar output; requires a sealed tape
    std::vector<std::vector<double>> backward_grad(Var output, std::span<const Var> wrt) const;
    std::vector<double> backward_grad(Var output, Var wrt) const;

    // records the reverse pass of `output` w.r.t. `wrt` as new nodes and
    // returns the gradient as a Var; requires an unsealed tape
    Var grad_graph(Var output, Var wrt);

  private:
    enum class Op : std::uint8_t {
        kConst, kInput,
        kAdd, kSub, kMul, kMatVec, kMatMul, kTranspose, kOuter,
        kRelu, kStep, kSum, kMean, kPow, kSqrt, kSquare,
        kBiasAdd, kDot, kL2Norm, kRowL2Norm,
        kScale, kBcastScalar, kBcastRow, kBcastCol, kColSum, kRowSum,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        int rows = 0;
        int cols = 0;
        double attr = 0.0;
        std::vector<double> val;
    };

    Var push(Op op, int a, int b, int rows, int cols, double attr);
    Var make_var(int id) const;
    void check(Var v) const;
    void eval_node(Node& n);
    void accumulate_numeric(const Node& n, int id, std::vector<std::vector<double>>& adj) const;

    std::vector<Node> nodes_;
    bool sealed_ = false;
    std::uint64_t tape_id_ = 0;
};

// d/d(params) of g = sqrt(||grad_x output||^2 + eps), computed by recording
// the reverse pass and differentiating through it. Seals the tape.
std::vector<std::vector<double>> grad_of_gradnorm(Tape& tape, Var output, Var input_point,
                                                  std::span<const Var> wrt_params, double eps);

// Builders construct a fresh graph from given leaf values and return the
// scalar output plus the leaves to differentiate. A builder may reject a draw
// (valid = false) to keep inputs away from non-differentiable points.
struct GradCheckGraph {
    Var output;
    std::vector<Var> inputs;
    bool valid = true;
};
using GraphBuilder = std::function<GradCheckGraph(Tape&, const std::vector<Matrix>&)>;

struct GradCheckInput {
    int rows = 1;
    int cols = 1;
    double lo = -2.0;
    double hi = 2.0;
    double min_abs = 0.0;  // redraw entries with |x| below this
};

struct GradCheckReport {
    bool pass = true;
    double worst_rel_err = 0.0;
    std::string worst_case;
};

// Compares backward_grad against central finite differences (step h) on
// n_trials random input draws. Relative error uses max(1, |a|, |fd|) in the
// denominator. `tamper`, when set, is applied to the analytic gradients
// before comparison (negative-control hook for the test suite).
GradCheckReport gradcheck(const GraphBuilder& builder, const std::vector<GradCheckInput>& input_specs,
                          double tolerance, int n_trials, RngStream rng, double h = 1e-5,
                          const std::function<void(std::vector<std::vector<double>>&)>& tamper = nullptr);

}  // namespace lab
