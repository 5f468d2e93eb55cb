#include "resonet/expr.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <regex>

namespace resonet {

struct ExprNode {
  Expr::Kind kind;
  double c = 0.0;
  int n = 0;
  std::string name;
  std::vector<Expr> kids;
};

Expr make_node(Expr::Kind k, std::vector<Expr> kids, int n) {
  auto node = std::make_shared<ExprNode>();
  node->kind = k;
  node->kids = std::move(kids);
  node->n = n;
  return Expr(std::shared_ptr<const ExprNode>(std::move(node)));
}

Expr::Expr() : Expr(0.0) {}

Expr::Expr(double c) {
  auto node = std::make_shared<ExprNode>();
  node->kind = Kind::Const;
  node->c = c;
  n_ = std::move(node);
}

Expr Expr::var(const std::string& name) {
  auto node = std::make_shared<ExprNode>();
  node->kind = Kind::Var;
  node->name = name;
  return Expr(std::shared_ptr<const ExprNode>(std::move(node)));
}

Expr::Kind Expr::kind() const { return n_->kind; }
double Expr::value() const { return n_->c; }
const std::string& Expr::name() const { return n_->name; }
int Expr::exponent() const { return n_->n; }
std::size_t Expr::arity() const { return n_->kids.size(); }
const Expr& Expr::child(std::size_t i) const { return n_->kids.at(i); }

bool Expr::depends_on(const std::string& v) const {
  if (kind() == Kind::Var) return name() == v;
  for (const auto& k : n_->kids)
    if (k.depends_on(v)) return true;
  return false;
}

void Expr::collect_variables(std::set<std::string>& out) const {
  if (kind() == Kind::Var) out.insert(name());
  for (const auto& k : n_->kids) k.collect_variables(out);
}

std::set<std::string> Expr::variables() const {
  std::set<std::string> s;
  collect_variables(s);
  return s;
}

// ---- construction with constant folding ----

Expr operator-(const Expr& a) {
  if (a.is_const()) return Expr(-a.value());
  if (a.kind() == Expr::Kind::Neg) return a.child(0);
  return make_node(Expr::Kind::Neg, {a}, 0);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() + b.value());
  if (a.is_const(0.0)) return b;
  if (b.is_const(0.0)) return a;
  if (b.kind() == Expr::Kind::Neg) return a - b.child(0);
  return make_node(Expr::Kind::Add, {a, b}, 0);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() - b.value());
  if (b.is_const(0.0)) return a;
  if (a.is_const(0.0)) return -b;
  if (b.kind() == Expr::Kind::Neg) return a + b.child(0);
  return make_node(Expr::Kind::Sub, {a, b}, 0);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() * b.value());
  if (b.is_const() && !a.is_const()) return b * a;
  if (a.is_const(0.0)) return Expr(0.0);
  if (a.is_const(1.0)) return b;
  if (a.is_const(-1.0)) return -b;
  if (a.is_const() && b.kind() == Expr::Kind::Mul && b.child(0).is_const())
    return Expr(a.value() * b.child(0).value()) * b.child(1);
  if (a.is_const() && b.kind() == Expr::Kind::Neg) return Expr(-a.value()) * b.child(0);
  return make_node(Expr::Kind::Mul, {a, b}, 0);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const() && b.value() != 0.0) return Expr(a.value() / b.value());
  if (b.is_const(1.0)) return a;
  if (a.is_const(0.0) && !b.is_const(0.0)) return Expr(0.0);
  return make_node(Expr::Kind::Div, {a, b}, 0);
}

Expr pow(const Expr& a, int n) {
  if (n == 0) return Expr(1.0);
  if (n == 1) return a;
  if (a.is_const() && (n > 0 || a.value() != 0.0)) return Expr(std::pow(a.value(), n));
  if (a.kind() == Expr::Kind::Pow) {
    long long m = static_cast<long long>(a.exponent()) * n;
    if (m == static_cast<int>(m)) return pow(a.child(0), static_cast<int>(m));
  }
  return make_node(Expr::Kind::Pow, {a}, n);
}

Expr sin(const Expr& a) {
  if (a.is_const()) return Expr(std::sin(a.value()));
  return make_node(Expr::Kind::Sin, {a}, 0);
}

Expr cos(const Expr& a) {
  if (a.is_const()) return Expr(std::cos(a.value()));
  return make_node(Expr::Kind::Cos, {a}, 0);
}

Expr exp(const Expr& a) {
  if (a.is_const()) return Expr(std::exp(a.value()));
  return make_node(Expr::Kind::Exp, {a}, 0);
}

// ---- printing ----

namespace {

int precedence(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
      return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
      return 2;
    case Expr::Kind::Neg:
      return 3;
    case Expr::Kind::Pow:
      return 4;
    case Expr::Kind::Const:
      return e.value() < 0 || std::signbit(e.value()) ? 3 : 5;
    default:
      return 5;
  }
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // shortest representation that round-trips
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) {
      s = buf;
      break;
    }
  }
  return s;
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print(e, out);
    out += ')';
  } else {
    print(e, out);
  }
}

void print(const Expr& e, std::string& out) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Const:
      out += number(e.value());
      return;
    case K::Var:
      out += e.name();
      return;
    case K::Neg:
      out += '-';
      print_wrapped(e.child(0), 3, out);
      return;
    case K::Add:
      print_wrapped(e.child(0), 1, out);
      out += " + ";
      print_wrapped(e.child(1), 2, out);
      return;
    case K::Sub:
      print_wrapped(e.child(0), 1, out);
      out += " - ";
      print_wrapped(e.child(1), 2, out);
      return;
    case K::Mul:
      print_wrapped(e.child(0), 2, out);
      out += '*';
      print_wrapped(e.child(1), 4, out);
      return;
    case K::Div:
      print_wrapped(e.child(0), 2, out);
      out += '/';
      print_wrapped(e.child(1), 4, out);
      return;
    case K::Pow:
      print_wrapped(e.child(0), 5, out);
      out += '^';
      out += std::to_string(e.exponent());
      return;
    case K::Sin:
    case K::Cos:
    case K::Exp:
      out += e.kind() == K::Sin ? "sin(" : e.kind() == K::Cos ? "cos(" : "exp(";
      print(e.child(0), out);
      out += ')';
      return;
  }
}

}  // namespace

std::string Expr::str() const {
  std::string s;
  print(*this, s);
  return s;
}

// ---- parsing ----

bool is_state_variable(std::string_view name) {
  static const std::regex re("^(I|p|q|phi)[1-9][0-9]*$|^t$");
  return std::regex_match(name.begin(), name.end(), re);
}

namespace {

class Parser {
 public:
  Parser(std::string_view s, const std::vector<std::string>& params) : s_(s), params_(params) {}

  Expr run() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) throw ParseError("unexpected character '" + std::string(1, s_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+'))
        e = e + term();
      else if (accept('-'))
        e = e - term();
      else
        return e;
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*')) {
        e = e * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Expr d = unary();
        if (d.is_const(0.0)) throw ParseError("division by constant zero", at);
        e = e / d;
      } else {
        return e;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr b = base();
    if (accept('^')) {
      skip();
      std::size_t at = pos_;
      bool neg = false;
      if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) {
        neg = s_[pos_] == '-';
        ++pos_;
      }
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) throw ParseError("integer exponent expected", at);
      long v = std::strtol(std::string(s_.substr(start, pos_ - start)).c_str(), nullptr, 10);
      if (v > 1000) throw ParseError("exponent too large", at);
      int n = static_cast<int>(neg ? -v : v);
      if (n < 0 && b.is_const(0.0)) throw ParseError("division by constant zero", at);
      return pow(b, n);
    }
    return b;
  }

  Expr base() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!accept(')')) throw ParseError("')' expected", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::string id(s_.substr(start, pos_ - start));
      if (id == "sin" || id == "cos" || id == "exp") {
        if (!accept('(')) throw ParseError("'(' expected after " + id, pos_);
        Expr a = expr();
        if (!accept(')')) throw ParseError("')' expected", pos_);
        return id == "sin" ? sin(a) : id == "cos" ? cos(a) : exp(a);
      }
      for (const auto& p : params_)
        if (p == id) return Expr::var(id);
      if (is_state_variable(id)) return Expr::var(id);
      throw ParseError("unknown identifier '" + id + "'", start);
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  Expr number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      std::size_t ds = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (ds == pos_) pos_ = save;
    }
    std::string tok(s_.substr(start, pos_ - start));
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError("malformed number '" + tok + "'", start);
    return Expr(v);
  }

  std::string_view s_;
  const std::vector<std::string>& params_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const std::vector<std::string>& parameters) {
  return Parser(text, parameters).run();
}

// ---- calculus and evaluation ----

Expr diff(const Expr& e, const std::string& v) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Const:
      return Expr(0.0);
    case K::Var:
      return Expr(e.name() == v ? 1.0 : 0.0);
    case K::Neg:
      return -diff(e.child(0), v);
    case K::Add:
      return diff(e.child(0), v) + diff(e.child(1), v);
    case K::Sub:
      return diff(e.child(0), v) - diff(e.child(1), v);
    case K::Mul: {
      const Expr& a = e.child(0);
      const Expr& b = e.child(1);
      return diff(a, v) * b + a * diff(b, v);
    }
    case K::Div: {
      const Expr& a = e.child(0);
      const Expr& b = e.child(1);
      Expr da = diff(a, v);
      Expr db = diff(b, v);
      if (db.is_const(0.0)) return da / b;
      return (da * b - a * db) / pow(b, 2);
    }
    case K::Pow: {
      const Expr& a = e.child(0);
      int n = e.exponent();
      return Expr(static_cast<double>(n)) * pow(a, n - 1) * diff(a, v);
    }
    case K::Sin:
      return cos(e.child(0)) * diff(e.child(0), v);
    case K::Cos:
      return -(sin(e.child(0)) * diff(e.child(0), v));
    case K::Exp:
      return e * diff(e.child(0), v);
  }
  return Expr(0.0);
}

namespace {
template <class F>
Expr rebuild(const Expr& e, const F& leaf) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Const:
      return e;
    case K::Var:
      return leaf(e);
    case K::Neg:
      return -rebuild(e.child(0), leaf);
    case K::Add:
      return rebuild(e.child(0), leaf) + rebuild(e.child(1), leaf);
    case K::Sub:
      return rebuild(e.child(0), leaf) - rebuild(e.child(1), leaf);
    case K::Mul:
      return rebuild(e.child(0), leaf) * rebuild(e.child(1), leaf);
    case K::Div:
      return rebuild(e.child(0), leaf) / rebuild(e.child(1), leaf);
    case K::Pow:
      return pow(rebuild(e.child(0), leaf), e.exponent());
    case K::Sin:
      return sin(rebuild(e.child(0), leaf));
    case K::Cos:
      return cos(rebuild(e.child(0), leaf));
    case K::Exp:
      return exp(rebuild(e.child(0), leaf));
  }
  return e;
}
}  // namespace

Expr substitute(const Expr& e, const std::map<std::string, double>& values) {
  return rebuild(e, [&](const Expr& v) {
    auto it = values.find(v.name());
    return it == values.end() ? v : Expr(it->second);
  });
}

Expr substitute(const Expr& e, const std::map<std::string, Expr>& values) {
  return rebuild(e, [&](const Expr& v) {
    auto it = values.find(v.name());
    return it == values.end() ? v : it->second;
  });
}

double eval(const Expr& e, const std::map<std::string, double>& bindings) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Const:
      return e.value();
    case K::Var: {
      auto it = bindings.find(e.name());
      if (it == bindings.end()) throw EvalError("unbound variable '" + e.name() + "'");
      return it->second;
    }
    case K::Neg:
      return -eval(e.child(0), bindings);
    case K::Add:
      return eval(e.child(0), bindings) + eval(e.child(1), bindings);
    case K::Sub:
      return eval(e.child(0), bindings) - eval(e.child(1), bindings);
    case K::Mul:
      return eval(e.child(0), bindings) * eval(e.child(1), bindings);
    case K::Div: {
      double d = eval(e.child(1), bindings);
      if (d == 0.0) throw EvalError("division by zero");
      return eval(e.child(0), bindings) / d;
    }
    case K::Pow: {
      double b = eval(e.child(0), bindings);
      if (b == 0.0 && e.exponent() < 0) throw EvalError("division by zero");
      return std::pow(b, e.exponent());
    }
    case K::Sin:
      return std::sin(eval(e.child(0), bindings));
    case K::Cos:
      return std::cos(eval(e.child(0), bindings));
    case K::Exp:
      return std::exp(eval(e.child(0), bindings));
  }
  return 0.0;
}

// ---- compiled programs ----

Compiled::Compiled(const Expr& e, const std::vector<std::string>& slots) { emit(e, slots, 1); }

void Compiled::emit(const Expr& e, const std::vector<std::string>& slots, int depth) {
  using K = Expr::Kind;
  if (depth > max_depth_) max_depth_ = depth;
  switch (e.kind()) {
    case K::Const:
      consts_.push_back(e.value());
      code_.push_back({Op::Const, static_cast<int>(consts_.size() - 1)});
      return;
    case K::Var: {
      for (std::size_t i = 0; i < slots.size(); ++i)
        if (slots[i] == e.name()) {
          code_.push_back({Op::Var, static_cast<int>(i)});
          return;
        }
      throw EvalError("unbound variable '" + e.name() + "'");
    }
    case K::Neg:
      emit(e.child(0), slots, depth);
      code_.push_back({Op::Neg, 0});
      return;
    case K::Pow:
      emit(e.child(0), slots, depth);
      code_.push_back({Op::Pow, e.exponent()});
      return;
    case K::Sin:
    case K::Cos:
    case K::Exp:
      emit(e.child(0), slots, depth);
      code_.push_back({e.kind() == K::Sin ? Op::Sin : e.kind() == K::Cos ? Op::Cos : Op::Exp, 0});
      return;
    default:
      emit(e.child(0), slots, depth);
      emit(e.child(1), slots, depth + 1);
      code_.push_back({e.kind() == K::Add   ? Op::Add
                       : e.kind() == K::Sub ? Op::Sub
                       : e.kind() == K::Mul ? Op::Mul
                                            : Op::Div,
                       0});
      return;
  }
}

double Compiled::eval_double(const double* x) const {
  if (code_.empty()) throw EvalError("empty program");
  double small[64];
  std::vector<double> big;
  double* st = small;
  if (max_depth_ >= 64) {
    big.resize(static_cast<std::size_t>(max_depth_) + 1);
    st = big.data();
  }
  int top = -1;
  for (const Ins& in : code_) {
    switch (in.op) {
      case Op::Const:
        st[++top] = consts_[in.arg];
        break;
      case Op::Var:
        st[++top] = x[in.arg];
        break;
      case Op::Neg:
        st[top] = -st[top];
        break;
      case Op::Add:
        st[top - 1] += st[top];
        --top;
        break;
      case Op::Sub:
        st[top - 1] -= st[top];
        --top;
        break;
      case Op::Mul:
        st[top - 1] *= st[top];
        --top;
        break;
      case Op::Div:
        if (st[top] == 0.0) throw EvalError("division by zero");
        st[top - 1] /= st[top];
        --top;
        break;
      case Op::Pow:
        if (in.arg < 0 && st[top] == 0.0) throw EvalError("division by zero");
        st[top] = std::pow(st[top], in.arg);
        break;
      case Op::Sin:
        st[top] = std::sin(st[top]);
        break;
      case Op::Cos:
        st[top] = std::cos(st[top]);
        break;
      case Op::Exp:
        st[top] = std::exp(st[top]);
        break;
    }
  }
  return st[top];
}

}  // namespace resonet
