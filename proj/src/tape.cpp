#include "mvsl/tape.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <utility>

namespace mvsl {

namespace {

// Largest double strictly below 1; used to keep tanh/sigmoid outputs inside
// their open ranges even when the exact result would round to +-1.
const double kOneBelow = std::nextafter(1.0, 0.0);
const double kTinyPositive = std::numeric_limits<double>::min();

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": operand shapes differ: " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

void require_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape) {
    throw ArgumentError(std::string(op) + ": operands live on different tapes");
  }
}

void require_scalar(const char* op, const Matrix& m) {
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError(std::string(op) + ": expected a 1x1 node, got " + shape_str(m));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }
Index Var::rows() const { return value().rows(); }
Index Var::cols() const { return value().cols(); }

Var Tape::constant(Matrix value) { return emplace(std::move(value), nullptr); }

Var Tape::param(ParamNode& p) {
  ParamNode* ptr = &p;
  Var v = emplace(p.value, [ptr](Tape& t, const Matrix& g) {
    (void)t;
    ptr->gradient += g;
  });
  nodes_[static_cast<std::size_t>(v.id)].bound = ptr;
  return v;
}

Var Tape::emplace(Matrix value, BackFn back) {
#ifndef NDEBUG
  assert(value.allFinite() && "tape node value must be finite");
#endif
  NodeRec n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) {
    throw ArgumentError("backward: loss node does not belong to this tape");
  }
  if (swept_) {
    throw ArgumentError("backward: tape already swept; build a fresh tape");
  }
  const Matrix& lv = value(loss);
  require_scalar("backward", lv);
  swept_ = true;
  accum(loss.id, Matrix::Ones(1, 1));
  for (int i = loss.id; i >= 0; --i) {
    NodeRec& n = nodes_[static_cast<std::size_t>(i)];
    if (n.has_grad && n.back) {
      n.back(*this, n.grad);
    }
  }
}

Matrix Tape::grad(Var v) const {
  const NodeRec& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.has_grad) {
    return Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

// ---- arithmetic -------------------------------------------------------------

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  require_same_shape("add", a.value(), b.value());
  Tape& t = *a.tape;
  int pa = a.id, pb = b.id;
  return t.emplace(a.value() + b.value(), [pa, pb](Tape& tt, const Matrix& g) {
    tt.accum(pa, g);
    tt.accum(pb, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  require_same_shape("sub", a.value(), b.value());
  Tape& t = *a.tape;
  int pa = a.id, pb = b.id;
  return t.emplace(a.value() - b.value(), [pa, pb](Tape& tt, const Matrix& g) {
    tt.accum(pa, g);
    tt.accum(pb, -g);
  });
}

Var neg(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(-a.value(), [pa](Tape& tt, const Matrix& g) { tt.accum(pa, -g); });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(s * a.value(),
                   [pa, s](Tape& tt, const Matrix& g) { tt.accum(pa, s * g); });
}

Var mul_scalar(Var a, Var s) {
  require_same_tape("mul_scalar", a, s);
  require_scalar("mul_scalar", s.value());
  Tape& t = *a.tape;
  int pa = a.id, ps = s.id;
  return t.emplace(s.value()(0, 0) * a.value(), [pa, ps](Tape& tt, const Matrix& g) {
    const double sv = tt.value(ps)(0, 0);
    tt.accum(pa, sv * g);
    Matrix gs(1, 1);
    gs(0, 0) = g.cwiseProduct(tt.value(pa)).sum();
    tt.accum(ps, gs);
  });
}

Var cmul(Var a, Var b) {
  require_same_tape("cmul", a, b);
  require_same_shape("cmul", a.value(), b.value());
  Tape& t = *a.tape;
  int pa = a.id, pb = b.id;
  return t.emplace(a.value().cwiseProduct(b.value()),
                   [pa, pb](Tape& tt, const Matrix& g) {
                     tt.accum(pa, g.cwiseProduct(tt.value(pb)));
                     tt.accum(pb, g.cwiseProduct(tt.value(pa)));
                   });
}

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  if (a.value().cols() != b.value().rows()) {
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.value()) +
                     " vs " + shape_str(b.value()));
  }
  Tape& t = *a.tape;
  int pa = a.id, pb = b.id;
  return t.emplace(a.value() * b.value(), [pa, pb](Tape& tt, const Matrix& g) {
    tt.accum(pa, g * tt.value(pb).transpose());
    tt.accum(pb, tt.value(pa).transpose() * g);
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(a.value().transpose(),
                   [pa](Tape& tt, const Matrix& g) { tt.accum(pa, g.transpose()); });
}

// ---- nonlinearities ---------------------------------------------------------

Var tanh_map(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y = a.value().array().tanh().min(kOneBelow).max(-kOneBelow).matrix();
  Var out = t.emplace(std::move(y), nullptr);
  const int self = out.id;
  t.set_back(self, [pa, self](Tape& tt, const Matrix& g) {
    const Matrix& yv = tt.value(self);
    tt.accum(pa, (g.array() * (1.0 - yv.array().square())).matrix());
  });
  return out;
}

Var sigmoid_map(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y = a.value().unaryExpr([](double x) {
    double s = stable_sigmoid(x);
    if (s < kTinyPositive) s = kTinyPositive;
    if (s > kOneBelow) s = kOneBelow;
    return s;
  });
  Var out = t.emplace(std::move(y), nullptr);
  const int self = out.id;
  t.set_back(self, [pa, self](Tape& tt, const Matrix& g) {
    const Matrix& yv = tt.value(self);
    tt.accum(pa, (g.array() * yv.array() * (1.0 - yv.array())).matrix());
  });
  return out;
}

namespace {

Matrix softmax_columns_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).maxCoeff();
    Vector e = (x.col(j).array() - m).exp();
    y.col(j) = e / e.sum();
  }
  return y;
}

}  // namespace

Var softmax_map(Var a) {
  const Matrix& x = a.value();
  if (x.rows() != 1 && x.cols() != 1) {
    throw ShapeError("softmax_map: expected a vector, got " + shape_str(x));
  }
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y;
  if (x.cols() == 1) {
    y = softmax_columns_value(x);
  } else {
    y = softmax_columns_value(x.transpose()).transpose();
  }
  Var out = t.emplace(std::move(y), nullptr);
  const int self = out.id;
  t.set_back(self, [pa, self](Tape& tt, const Matrix& g) {
    const Matrix& yv = tt.value(self);
    const double dot = g.cwiseProduct(yv).sum();
    tt.accum(pa, yv.cwiseProduct(g - Matrix::Constant(g.rows(), g.cols(), dot)));
  });
  return out;
}

Var softmax_cols(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  Var out = t.emplace(softmax_columns_value(a.value()), nullptr);
  const int self = out.id;
  t.set_back(self, [pa, self](Tape& tt, const Matrix& g) {
    const Matrix& yv = tt.value(self);
    RowVector dots = g.cwiseProduct(yv).colwise().sum();
    Matrix shifted = g;
    shifted.rowwise() -= dots;
    tt.accum(pa, yv.cwiseProduct(shifted));
  });
  return out;
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo < hi)) {
    throw ArgumentError("clamp: lower bound must be below upper bound");
  }
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(a.value().cwiseMax(lo).cwiseMin(hi),
                   [pa, lo, hi](Tape& tt, const Matrix& g) {
                     const Matrix& x = tt.value(pa);
                     Matrix masked =
                         ((x.array() >= lo && x.array() <= hi).cast<double>() *
                          g.array())
                             .matrix();
                     tt.accum(pa, masked);
                   });
}

Var log_map(Var a) {
  if ((a.value().array() <= 0.0).any()) {
    throw ArgumentError("log_map: input has non-positive entries; clamp first");
  }
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(a.value().array().log().matrix(),
                   [pa](Tape& tt, const Matrix& g) {
                     tt.accum(pa, (g.array() / tt.value(pa).array()).matrix());
                   });
}

// ---- reductions ---------------------------------------------------------------

Var sum_all(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return t.emplace(std::move(y), [pa](Tape& tt, const Matrix& g) {
    const Matrix& x = tt.value(pa);
    tt.accum(pa, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean_all(Var a) {
  const Matrix& x = a.value();
  if (x.size() == 0) {
    throw ArgumentError("mean_all: empty operand");
  }
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y(1, 1);
  y(0, 0) = x.mean();
  return t.emplace(std::move(y), [pa](Tape& tt, const Matrix& g) {
    const Matrix& xv = tt.value(pa);
    tt.accum(pa, Matrix::Constant(xv.rows(), xv.cols(),
                                  g(0, 0) / static_cast<double>(xv.size())));
  });
}

Var squared_frobenius(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y(1, 1);
  y(0, 0) = a.value().squaredNorm();
  return t.emplace(std::move(y), [pa](Tape& tt, const Matrix& g) {
    tt.accum(pa, (2.0 * g(0, 0)) * tt.value(pa));
  });
}

Var l1_norm(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y(1, 1);
  y(0, 0) = a.value().cwiseAbs().sum();
  return t.emplace(std::move(y), [pa](Tape& tt, const Matrix& g) {
    tt.accum(pa, (g(0, 0) * tt.value(pa).array().sign()).matrix());
  });
}

// ---- structure ----------------------------------------------------------------

Var add_col_bias(Var a, Var bias) {
  require_same_tape("add_col_bias", a, bias);
  const Matrix& x = a.value();
  const Matrix& b = bias.value();
  if (b.cols() != 1 || b.rows() != x.rows()) {
    throw ShapeError("add_col_bias: bias " + shape_str(b) +
                     " does not match operand " + shape_str(x));
  }
  Tape& t = *a.tape;
  int pa = a.id, pb = bias.id;
  Matrix y = x;
  y.colwise() += Vector(b.col(0));
  return t.emplace(std::move(y), [pa, pb](Tape& tt, const Matrix& g) {
    tt.accum(pa, g);
    tt.accum(pb, g.rowwise().sum());
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ArgumentError("concat_rows: no operands");
  }
  Tape& t = *parts[0].tape;
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Var& p : parts) {
    require_same_tape("concat_rows", parts[0], p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column counts differ: " + shape_str(parts[0].value()) +
                       " vs " + shape_str(p.value()));
    }
    rows += p.rows();
  }
  Matrix y(rows, cols);
  std::vector<int> ids;
  std::vector<Index> offs, sizes;
  Index at = 0;
  for (const Var& p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    ids.push_back(p.id);
    offs.push_back(at);
    sizes.push_back(p.rows());
    at += p.rows();
  }
  return t.emplace(std::move(y), [ids, offs, sizes](Tape& tt, const Matrix& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tt.accum(ids[i], g.middleRows(offs[i], sizes[i]));
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ArgumentError("concat_cols: no operands");
  }
  Tape& t = *parts[0].tape;
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    require_same_tape("concat_cols", parts[0], p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row counts differ: " + shape_str(parts[0].value()) +
                       " vs " + shape_str(p.value()));
    }
    cols += p.cols();
  }
  Matrix y(rows, cols);
  std::vector<int> ids;
  std::vector<Index> offs, sizes;
  Index at = 0;
  for (const Var& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id);
    offs.push_back(at);
    sizes.push_back(p.cols());
    at += p.cols();
  }
  return t.emplace(std::move(y), [ids, offs, sizes](Tape& tt, const Matrix& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tt.accum(ids[i], g.middleCols(offs[i], sizes[i]));
    }
  });
}

Var concat_rows(std::initializer_list<Var> parts) {
  std::vector<Var> v(parts);
  return concat_rows(std::span<const Var>(v));
}

Var concat_cols(std::initializer_list<Var> parts) {
  std::vector<Var> v(parts);
  return concat_cols(std::span<const Var>(v));
}

Var gather_rows(Var a, std::vector<int> rows) {
  const Matrix& x = a.value();
  for (int r : rows) {
    if (r < 0 || r >= x.rows()) {
      throw ArgumentError("gather_rows: row index " + std::to_string(r) +
                          " out of range for " + shape_str(x));
    }
  }
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    y.row(static_cast<Index>(r)) = x.row(rows[r]);
  }
  return t.emplace(std::move(y), [pa, rows](Tape& tt, const Matrix& g) {
    const Matrix& xv = tt.value(pa);
    Matrix d = Matrix::Zero(xv.rows(), xv.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      d.row(rows[r]) += g.row(static_cast<Index>(r));
    }
    tt.accum(pa, d);
  });
}

Var select_cols(Var a, std::vector<int> cols) {
  const Matrix& x = a.value();
  for (int c : cols) {
    if (c < 0 || c >= x.cols()) {
      throw ArgumentError("select_cols: column index " + std::to_string(c) +
                          " out of range for " + shape_str(x));
    }
  }
  Tape& t = *a.tape;
  int pa = a.id;
  Matrix y(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    y.col(static_cast<Index>(c)) = x.col(cols[c]);
  }
  return t.emplace(std::move(y), [pa, cols](Tape& tt, const Matrix& g) {
    const Matrix& xv = tt.value(pa);
    Matrix d = Matrix::Zero(xv.rows(), xv.cols());
    for (std::size_t c = 0; c < cols.size(); ++c) {
      d.col(cols[c]) += g.col(static_cast<Index>(c));
    }
    tt.accum(pa, d);
  });
}

Var stop_gradient(Var a) {
  Tape& t = *a.tape;
  return t.emplace(a.value(), nullptr);
}

Var linear_apply(Var W, Var x, const Var* b) {
  if (W.value().cols() != x.value().rows()) {
    throw ShapeError("linear_apply: weight " + shape_str(W.value()) +
                     " cannot multiply input " + shape_str(x.value()));
  }
  if (b != nullptr) {
    const Matrix& bv = b->value();
    if (bv.cols() != 1 || bv.rows() != W.value().rows()) {
      throw ShapeError("linear_apply: bias " + shape_str(bv) +
                       " does not match weight " + shape_str(W.value()));
    }
  }
  Var y = matmul(W, x);
  if (b != nullptr) {
    y = add_col_bias(y, *b);
  }
  return y;
}

}  // namespace mvsl
