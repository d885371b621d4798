#pragma once

#include <memory>
#include <string>

namespace mtlab {

/// Scalar expression in x and y: numbers, x, y, pi, + - * / ^, unary minus,
/// parentheses, and exp log sqrt sin cos tan tanh abs of one argument.
class Expr {
public:
    struct Node;

    static Expr parse(const std::string& text);  ///< throws ValidationError with the column of the error
    double operator()(double x, double y) const;
    const std::string& text() const { return text_; }

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

}  // namespace mtlab
