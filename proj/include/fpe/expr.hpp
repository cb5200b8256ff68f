#pragma once

#include <memory>
#include <stdexcept>
#include <string>

namespace fpe {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& msg, std::size_t offset) : std::runtime_error(msg), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct ExprVars {
  double x = 0.0, y = 0.0, t = 0.0, eps = 0.0;
};

// Arithmetic expression in x, y, t and eps: + - * / ^, parentheses, numeric
// literals, the constant pi and the functions sin cos tan exp log sqrt abs.
class Expression {
 public:
  struct Node;
  Expression() = default;
  explicit Expression(std::shared_ptr<const Node> root, std::string text);
  double operator()(const ExprVars& v) const;
  double operator()(double x, double y = 0.0, double t = 0.0) const { return (*this)({x, y, t, 0.0}); }
  const std::string& text() const { return text_; }
  bool empty() const { return !root_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

// throws SyntaxError with the byte offset of the first offending character
Expression parse_coefficient(const std::string& text);

}  // namespace fpe
