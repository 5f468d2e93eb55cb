#pragma once

#include <type_traits>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace resonet {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExprNode;

// Immutable expression tree. Copies share structure.
class Expr {
 public:
  enum class Kind : std::uint8_t { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp };

  Expr();
  explicit Expr(double c);
  static Expr var(const std::string& name);

  Kind kind() const;
  double value() const;
  const std::string& name() const;
  int exponent() const;
  std::size_t arity() const;
  const Expr& child(std::size_t i) const;

  bool is_const() const { return kind() == Kind::Const; }
  bool is_const(double v) const { return is_const() && value() == v; }
  bool depends_on(const std::string& v) const;
  void collect_variables(std::set<std::string>& out) const;
  std::set<std::string> variables() const;

  std::string str() const;

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : n_(std::move(n)) {}
  std::shared_ptr<const ExprNode> n_;
  friend Expr make_node(Kind, std::vector<Expr>, int);
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& a, int n);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);

// Legal free-variable names: I<j>, p<j>, q<j>, phi<j> (j >= 1) and t.
bool is_state_variable(std::string_view name);

// Identifiers must be state variables or listed parameters.
Expr parse(std::string_view text, const std::vector<std::string>& parameters = {});

Expr diff(const Expr& e, const std::string& v);
Expr substitute(const Expr& e, const std::map<std::string, double>& values);
Expr substitute(const Expr& e, const std::map<std::string, Expr>& values);
double eval(const Expr& e, const std::map<std::string, double>& bindings);

// Stack program with variables resolved to slots.
class Compiled {
 public:
  Compiled() = default;
  Compiled(const Expr& e, const std::vector<std::string>& slots);

  template <class T>
  T operator()(const T* x) const;
  double operator()(std::span<const double> x) const { return (*this)(x.data()); }

  bool is_constant() const { return code_.size() == 1 && code_[0].op == Op::Const; }
  double constant_value() const { return consts_.at(code_[0].arg); }
  bool empty() const { return code_.empty(); }

 private:
  enum class Op : std::uint8_t { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp };
  struct Ins {
    Op op;
    int arg;
  };
  double eval_double(const double* x) const;
  void emit(const Expr& e, const std::vector<std::string>& slots, int depth);
  std::vector<Ins> code_;
  std::vector<double> consts_;
  int max_depth_ = 0;
};

namespace detail {
template <class T>
inline T powi(const T& x, int n) {
  if (n == 0) return T(x) * 0.0 + 1.0;
  if (n < 0) return 1.0 / powi(x, -n);
  T r = x;
  T b = x;
  int m = n - 1;
  while (m > 0) {
    if (m & 1) r = r * b;
    m >>= 1;
    if (m) b = b * b;
  }
  return r;
}
inline double powi(const double& x, int n) { return std::pow(x, n); }

template <class T>
inline bool is_zero_divisor(const T& b) {
  return constant_term(b) == 0.0;
}
inline bool is_zero_divisor(const double& b) { return b == 0.0; }
}  // namespace detail

template <class T>
T Compiled::operator()(const T* x) const {
  if constexpr (std::is_same_v<T, double>) return eval_double(x);
  using std::cos;
  using std::exp;
  using std::sin;
  if (code_.empty()) throw EvalError("empty program");
  std::vector<T> st;
  st.reserve(static_cast<std::size_t>(max_depth_) + 1);
  for (const Ins& in : code_) {
    switch (in.op) {
      case Op::Const:
        st.push_back(T(x[0]) * 0.0 + consts_[in.arg]);
        break;
      case Op::Var:
        st.push_back(x[in.arg]);
        break;
      case Op::Neg:
        st.back() = -st.back();
        break;
      case Op::Add: {
        T b = std::move(st.back());
        st.pop_back();
        st.back() = st.back() + b;
        break;
      }
      case Op::Sub: {
        T b = std::move(st.back());
        st.pop_back();
        st.back() = st.back() - b;
        break;
      }
      case Op::Mul: {
        T b = std::move(st.back());
        st.pop_back();
        st.back() = st.back() * b;
        break;
      }
      case Op::Div: {
        T b = std::move(st.back());
        st.pop_back();
        if (detail::is_zero_divisor(b)) throw EvalError("division by zero");
        st.back() = st.back() / b;
        break;
      }
      case Op::Pow:
        if (in.arg < 0 && detail::is_zero_divisor(st.back())) throw EvalError("division by zero");
        st.back() = detail::powi(st.back(), in.arg);
        break;
      case Op::Sin:
        st.back() = sin(st.back());
        break;
      case Op::Cos:
        st.back() = cos(st.back());
        break;
      case Op::Exp:
        st.back() = exp(st.back());
        break;
    }
  }
  return st.back();
}

}  // namespace resonet
