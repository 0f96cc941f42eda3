#pragma once

#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace safesynth {

// Exact rational arithmetic on 64-bit numerator / positive 64-bit denominator.
// Every value is kept in lowest terms. Arithmetic goes through 128-bit
// intermediates and throws std::overflow_error instead of wrapping, so model
// probabilities stay exact end to end.
class Rational {
public:
    constexpr Rational() : num_(0), den_(1) {}
    Rational(std::int64_t value) : num_(value), den_(1) {}
    Rational(std::int64_t numerator, std::int64_t denominator) {
        if (denominator == 0)
            throw std::invalid_argument("Rational: zero denominator");
        assign(static_cast<__int128>(numerator), static_cast<__int128>(denominator));
    }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }

    // Accepts "7", "-3/4", "0.25"; decimals are read exactly in base 10.
    static Rational parse(std::string_view text) {
        std::size_t pos = 0;
        Rational r = parsePrefix(text, pos);
        if (pos != text.size())
            throw std::invalid_argument("Rational: trailing characters in '" + std::string(text) + "'");
        return r;
    }

    // Parses a rational starting at `pos`, advancing it past the literal.
    static Rational parsePrefix(std::string_view text, std::size_t& pos) {
        std::size_t i = pos;
        bool negative = false;
        if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
            negative = text[i] == '-';
            ++i;
        }
        std::size_t digitsStart = i;
        __int128 intPart = 0;
        while (i < text.size() && isDigit(text[i])) {
            intPart = intPart * 10 + (text[i] - '0');
            checkParseRange(intPart);
            ++i;
        }
        if (i == digitsStart)
            throw std::invalid_argument("Rational: expected digits in '" + std::string(text) + "'");
        __int128 num = intPart;
        __int128 den = 1;
        if (i < text.size() && text[i] == '/') {
            ++i;
            std::size_t denStart = i;
            __int128 d = 0;
            while (i < text.size() && isDigit(text[i])) {
                d = d * 10 + (text[i] - '0');
                checkParseRange(d);
                ++i;
            }
            if (i == denStart || d == 0)
                throw std::invalid_argument("Rational: bad denominator in '" + std::string(text) + "'");
            den = d;
        } else if (i < text.size() && text[i] == '.') {
            ++i;
            std::size_t fracStart = i;
            while (i < text.size() && isDigit(text[i])) {
                num = num * 10 + (text[i] - '0');
                den *= 10;
                checkParseRange(num);
                checkParseRange(den);
                ++i;
            }
            if (i == fracStart)
                throw std::invalid_argument("Rational: expected digits after '.' in '" + std::string(text) + "'");
        }
        if (negative) num = -num;
        pos = i;
        Rational r;
        r.assign(num, den);
        return r;
    }

    std::string str() const {
        std::string s = std::to_string(num_);
        if (den_ != 1) {
            s += '/';
            s += std::to_string(den_);
        }
        return s;
    }

    double toDouble() const {
        return static_cast<double>(num_) / static_cast<double>(den_);
    }

    bool isZero() const { return num_ == 0; }
    bool isOne() const { return num_ == 1 && den_ == 1; }
    bool isNegative() const { return num_ < 0; }

    friend Rational operator+(const Rational& a, const Rational& b) {
        __int128 n = i128(a.num_) * b.den_ + i128(b.num_) * a.den_;
        __int128 d = i128(a.den_) * b.den_;
        Rational r;
        r.assign(n, d);
        return r;
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        __int128 n = i128(a.num_) * b.den_ - i128(b.num_) * a.den_;
        __int128 d = i128(a.den_) * b.den_;
        Rational r;
        r.assign(n, d);
        return r;
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        Rational r;
        r.assign(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
        return r;
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0)
            throw std::invalid_argument("Rational: division by zero");
        Rational r;
        r.assign(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
        return r;
    }
    Rational operator-() const {
        Rational r;
        r.num_ = -num_;
        r.den_ = den_;
        return r;
    }
    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }
    Rational& operator/=(const Rational& o) { return *this = *this / o; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
    }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

private:
    static __int128 i128(std::int64_t v) { return static_cast<__int128>(v); }
    static bool isDigit(char c) { return c >= '0' && c <= '9'; }

    static void checkParseRange(__int128 v) {
        if (v > static_cast<__int128>(std::numeric_limits<std::int64_t>::max()))
            throw std::overflow_error("Rational: literal out of 64-bit range");
    }

    void assign(__int128 n, __int128 d) {
        if (d < 0) {
            n = -n;
            d = -d;
        }
        __int128 g = gcd128(n < 0 ? -n : n, d);
        if (g > 1) {
            n /= g;
            d /= g;
        }
        constexpr __int128 lo = std::numeric_limits<std::int64_t>::min();
        constexpr __int128 hi = std::numeric_limits<std::int64_t>::max();
        if (n < lo || n > hi || d > hi)
            throw std::overflow_error("Rational: value out of 64-bit range");
        num_ = static_cast<std::int64_t>(n);
        den_ = static_cast<std::int64_t>(d);
    }

    static __int128 gcd128(__int128 a, __int128 b) {
        while (b != 0) {
            __int128 t = a % b;
            a = b;
            b = t;
        }
        return a == 0 ? 1 : a;
    }

    std::int64_t num_;
    std::int64_t den_;
};

} // namespace safesynth
