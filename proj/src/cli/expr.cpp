#include "fpe/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace fpe {

struct Expression::Node {
  enum Kind { Num, X, Y, T, Eps, Neg, Add, Sub, Mul, Div, Pow, Call } kind = Num;
  double value = 0.0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> a, b;

  double eval(const ExprVars& v) const {
    switch (kind) {
      case Num: return value;
      case X: return v.x;
      case Y: return v.y;
      case T: return v.t;
      case Eps: return v.eps;
      case Neg: return -a->eval(v);
      case Add: return a->eval(v) + b->eval(v);
      case Sub: return a->eval(v) - b->eval(v);
      case Mul: return a->eval(v) * b->eval(v);
      case Div: return a->eval(v) / b->eval(v);
      case Pow: return std::pow(a->eval(v), b->eval(v));
      case Call: return fn(a->eval(v));
    }
    return 0.0;
  }
};

Expression::Expression(std::shared_ptr<const Node> root, std::string text)
    : root_(std::move(root)), text_(std::move(text)) {}

double Expression::operator()(const ExprVars& v) const { return root_ ? root_->eval(v) : 0.0; }

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Expression::Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double fabs_(double x) { return std::fabs(x); }
double sin_(double x) { return std::sin(x); }
double cos_(double x) { return std::cos(x); }
double tan_(double x) { return std::tan(x); }
double exp_(double x) { return std::exp(x); }
double log_(double x) { return std::log(x); }
double sqrt_(double x) { return std::sqrt(x); }

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError("SyntaxError at offset " + std::to_string(pos_) + ": " + what, pos_);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (eat('+'))
        n = make(Expression::Node::Add, n, term());
      else if (eat('-'))
        n = make(Expression::Node::Sub, n, term());
      else
        return n;
    }
  }
  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (eat('*'))
        n = make(Expression::Node::Mul, n, unary());
      else if (eat('/'))
        n = make(Expression::Node::Div, n, unary());
      else
        return n;
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(Expression::Node::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }
  // right associative, binds tighter than unary minus on its left: -x^2 = -(x^2)
  NodePtr power() {
    NodePtr n = primary();
    if (eat('^')) return make(Expression::Node::Pow, n, unary());
    return n;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("expected an expression");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Expression::Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "x") return make(Expression::Node::X);
      if (id == "y") return make(Expression::Node::Y);
      if (id == "t") return make(Expression::Node::T);
      if (id == "eps") return make(Expression::Node::Eps);
      if (id == "pi") {
        auto n = std::make_shared<Expression::Node>();
        n->value = M_PI;
        return n;
      }
      static const std::vector<std::pair<std::string, double (*)(double)>> funcs = {
          {"sin", sin_}, {"cos", cos_}, {"tan", tan_}, {"exp", exp_},
          {"log", log_}, {"sqrt", sqrt_}, {"abs", fabs_}};
      for (const auto& [name, fn] : funcs) {
        if (id != name) continue;
        if (!eat('(')) fail("expected '(' after " + id);
        auto n = std::make_shared<Expression::Node>();
        n->kind = Expression::Node::Call;
        n->fn = fn;
        n->a = expr();
        if (!eat(')')) fail("expected ')'");
        return n;
      }
      pos_ = start;
      fail("unknown identifier '" + id + "'");
    }
    fail("unexpected character");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse_coefficient(const std::string& text) { return Expression(Parser(text).parse(), text); }

}  // namespace fpe
