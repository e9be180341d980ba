#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lm::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// A trainable parameter. Gradients accumulate into `grad` during backward
// passes; the optimizer consumes and the caller zeroes them.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

namespace detail {
inline void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(
        std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
        "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
        "x" + std::to_string(b.cols()) + ")");
  }
}
}  // namespace detail

// Reverse-mode tape over dense matrices. Columns are batch entries.
// Ops record a closure that routes the output gradient to the inputs;
// backward() replays them in reverse creation order. One backward per tape.
class GradientTape {
 public:
  using Ref = int;

  Ref input(Mat v) { return push(std::move(v), nullptr); }

  Ref param(Param& p) {
    Ref r = push(p.value, nullptr);
    nodes_[r].back = [this, r, &p]() { p.grad += nodes_[r].grad; };
    return r;
  }

  Ref matmul(Ref a, Ref b) {
    const Mat& av = val(a);
    const Mat& bv = val(b);
    if (av.cols() != bv.rows()) {
      throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                  std::to_string(av.cols()) + " vs " +
                                  std::to_string(bv.rows()) + ")");
    }
    Ref r = push(av * bv, nullptr);
    nodes_[r].back = [this, r, a, b]() {
      const Mat& g = nodes_[r].grad;
      nodes_[a].grad += g * val(b).transpose();
      nodes_[b].grad += val(a).transpose() * g;
    };
    return r;
  }

  // x: n x B, b: n x 1 broadcast over columns.
  Ref add_bias(Ref x, Ref b) {
    const Mat& xv = val(x);
    const Mat& bv = val(b);
    if (bv.cols() != 1 || bv.rows() != xv.rows()) {
      throw std::invalid_argument("add_bias: bias must be " +
                                  std::to_string(xv.rows()) + "x1");
    }
    Ref r = push(xv.colwise() + bv.col(0), nullptr);
    nodes_[r].back = [this, r, x, b]() {
      const Mat& g = nodes_[r].grad;
      nodes_[x].grad += g;
      nodes_[b].grad += g.rowwise().sum();
    };
    return r;
  }

  Ref add(Ref a, Ref b) {
    detail::check_same_shape(val(a), val(b), "add");
    Ref r = push(val(a) + val(b), nullptr);
    nodes_[r].back = [this, r, a, b]() {
      nodes_[a].grad += nodes_[r].grad;
      nodes_[b].grad += nodes_[r].grad;
    };
    return r;
  }

  Ref sub(Ref a, Ref b) {
    detail::check_same_shape(val(a), val(b), "sub");
    Ref r = push(val(a) - val(b), nullptr);
    nodes_[r].back = [this, r, a, b]() {
      nodes_[a].grad += nodes_[r].grad;
      nodes_[b].grad -= nodes_[r].grad;
    };
    return r;
  }

  Ref mul(Ref a, Ref b) {
    detail::check_same_shape(val(a), val(b), "mul");
    Ref r = push(val(a).cwiseProduct(val(b)), nullptr);
    nodes_[r].back = [this, r, a, b]() {
      nodes_[a].grad += nodes_[r].grad.cwiseProduct(val(b));
      nodes_[b].grad += nodes_[r].grad.cwiseProduct(val(a));
    };
    return r;
  }

  Ref scale(Ref a, double s) {
    Ref r = push(val(a) * s, nullptr);
    nodes_[r].back = [this, r, a, s]() { nodes_[a].grad += nodes_[r].grad * s; };
    return r;
  }

  Ref add_scalar(Ref a, double s) {
    Ref r = push(val(a).array() + s, nullptr);
    nodes_[r].back = [this, r, a]() { nodes_[a].grad += nodes_[r].grad; };
    return r;
  }

  Ref elu(Ref a) {
    Mat v = val(a).unaryExpr(
        [](double x) { return x > 0.0 ? x : std::exp(x) - 1.0; });
    Ref r = push(std::move(v), nullptr);
    nodes_[r].back = [this, r, a]() {
      // d/dx elu = 1 for x > 0, exp(x) = elu(x) + 1 otherwise
      Mat d = val(r).unaryExpr(
          [](double y) { return y > 0.0 ? 1.0 : y + 1.0; });
      nodes_[a].grad += nodes_[r].grad.cwiseProduct(d);
    };
    return r;
  }

  Ref exp(Ref a) {
    Ref r = push(val(a).array().exp(), nullptr);
    nodes_[r].back = [this, r, a]() {
      nodes_[a].grad += nodes_[r].grad.cwiseProduct(val(r));
    };
    return r;
  }

  Ref log(Ref a) {
    Ref r = push(val(a).array().log(), nullptr);
    nodes_[r].back = [this, r, a]() {
      nodes_[a].grad += nodes_[r].grad.cwiseQuotient(val(a));
    };
    return r;
  }

  Ref square(Ref a) {
    Ref r = push(val(a).array().square(), nullptr);
    nodes_[r].back = [this, r, a]() {
      nodes_[a].grad += 2.0 * nodes_[r].grad.cwiseProduct(val(a));
    };
    return r;
  }

  // Gradient flows only where lo < x < hi.
  Ref clamp(Ref a, double lo, double hi) {
    Ref r = push(val(a).array().max(lo).min(hi), nullptr);
    nodes_[r].back = [this, r, a, lo, hi]() {
      const Mat& x = val(a);
      Mat g = nodes_[r].grad;
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          if (x(i, j) <= lo || x(i, j) >= hi) g(i, j) = 0.0;
      nodes_[a].grad += g;
    };
    return r;
  }

  Ref minimum(Ref a, Ref b) {
    detail::check_same_shape(val(a), val(b), "minimum");
    Ref r = push(val(a).cwiseMin(val(b)), nullptr);
    nodes_[r].back = [this, r, a, b]() {
      const Mat& av = val(a);
      const Mat& bv = val(b);
      const Mat& g = nodes_[r].grad;
      for (Eigen::Index j = 0; j < av.cols(); ++j)
        for (Eigen::Index i = 0; i < av.rows(); ++i) {
          if (av(i, j) <= bv(i, j))
            nodes_[a].grad(i, j) += g(i, j);
          else
            nodes_[b].grad(i, j) += g(i, j);
        }
    };
    return r;
  }

  Ref slice_rows(Ref a, int row0, int nrows) {
    const Mat& av = val(a);
    if (row0 < 0 || row0 + nrows > av.rows()) {
      throw std::invalid_argument("slice_rows: range out of bounds");
    }
    Ref r = push(av.middleRows(row0, nrows), nullptr);
    nodes_[r].back = [this, r, a, row0, nrows]() {
      nodes_[a].grad.middleRows(row0, nrows) += nodes_[r].grad;
    };
    return r;
  }

  // Sum over rows: n x B -> 1 x B.
  Ref colwise_sum(Ref a) {
    Ref r = push(val(a).colwise().sum(), nullptr);
    nodes_[r].back = [this, r, a]() {
      nodes_[a].grad.rowwise() += nodes_[r].grad.row(0);
    };
    return r;
  }

  Ref sum(Ref a) {
    Mat v(1, 1);
    v(0, 0) = val(a).sum();
    Ref r = push(std::move(v), nullptr);
    nodes_[r].back = [this, r, a]() {
      nodes_[a].grad.array() += nodes_[r].grad(0, 0);
    };
    return r;
  }

  Ref mean(Ref a) {
    double n = static_cast<double>(val(a).size());
    Mat v(1, 1);
    v(0, 0) = val(a).sum() / n;
    Ref r = push(std::move(v), nullptr);
    nodes_[r].back = [this, r, a, n]() {
      nodes_[a].grad.array() += nodes_[r].grad(0, 0) / n;
    };
    return r;
  }

  const Mat& value(Ref r) const { return val(r); }
  bool empty() const { return nodes_.empty(); }

  // Seeds d(loss)/d(loss) = 1 and replays recorded ops in reverse.
  // A second call on the same tape is an error.
  void backward(Ref loss) {
    if (nodes_.empty()) {
      throw std::logic_error("backward: no forward computation recorded");
    }
    if (loss < 0 || loss >= static_cast<Ref>(nodes_.size())) {
      throw std::invalid_argument("backward: unknown loss node");
    }
    if (backward_done_) {
      throw std::logic_error("backward: tape already consumed");
    }
    if (val(loss).size() != 1) {
      throw std::invalid_argument("backward: loss must be scalar");
    }
    backward_done_ = true;
    nodes_[loss].grad(0, 0) = 1.0;
    for (Ref r = loss; r >= 0; --r) {
      if (nodes_[r].back) nodes_[r].back();
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;
  };

  const Mat& val(Ref r) const { return nodes_[r].value; }

  Ref push(Mat v, std::function<void()> back) {
    Node n;
    n.grad = Mat::Zero(v.rows(), v.cols());
    n.value = std::move(v);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace lm::nn
