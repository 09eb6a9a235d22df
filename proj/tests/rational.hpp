// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>

namespace cultdiff::testing {

/// Exact fraction for checking formulas without rounding.
class Rational {
public:
    Rational(long n = 0) : m_num(n), m_den(1) {}  // NOLINT: implicit on purpose
    Rational(std::int64_t n, std::int64_t d) : m_num(n), m_den(d) { reduce(); }

    friend Rational operator+(Rational a, Rational b) { return {a.m_num * b.m_den + b.m_num * a.m_den, a.m_den * b.m_den}; }
    friend Rational operator-(Rational a, Rational b) { return {a.m_num * b.m_den - b.m_num * a.m_den, a.m_den * b.m_den}; }
    friend Rational operator*(Rational a, Rational b) { return {a.m_num * b.m_num, a.m_den * b.m_den}; }
    friend Rational operator/(Rational a, Rational b) { return {a.m_num * b.m_den, a.m_den * b.m_num}; }
    friend bool operator==(Rational a, Rational b) { return a.m_num == b.m_num && a.m_den == b.m_den; }
    friend bool operator>(Rational a, Rational b) { return a.m_num * b.m_den > b.m_num * a.m_den; }
    std::int64_t num() const { return m_num; }
    std::int64_t den() const { return m_den; }
    friend std::ostream& operator<<(std::ostream& os, Rational r) { return os << r.m_num << '/' << r.m_den; }

private:
    void reduce() {
        if (m_den < 0) {
            m_num = -m_num;
            m_den = -m_den;
        }
        const auto g = std::gcd(m_num, m_den);
        if (g > 1) {
            m_num /= g;
            m_den /= g;
        }
    }
    std::int64_t m_num;
    std::int64_t m_den;
};

}  // namespace cultdiff::testing
