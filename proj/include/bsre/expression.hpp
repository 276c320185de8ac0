#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace bsre {

/// A small scalar expression over the variables t (time), w (current value
/// of the Brownian driver) and x (spatial coordinate for multiplication
/// profiles).
///
/// Grammar:
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' unary)?
///   atom   := number | 't' | 'w' | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
///   func   := sin | cos | exp | log | sqrt | abs
class Expression {
public:
    /// Throws InvalidConfiguration on a syntax error.
    static Expression parse(std::string_view text);
    static Expression constant(double value);

    double operator()(double t, double w, double x = 0.0) const;

    const std::string& source() const noexcept { return source_; }
    bool uses_w() const noexcept { return uses_w_; }
    bool uses_x() const noexcept { return uses_x_; }
    bool uses_t() const noexcept { return uses_t_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::string source_;
    bool uses_t_ = false, uses_w_ = false, uses_x_ = false;
};

}  // namespace bsre
