#pragma once

// Exact rational arithmetic. All values in the engine are rationals in
// canonical reduced form; nothing is ever rounded unless a caller asks for a
// dyadic snap or a decimal rendering explicitly.

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lia {

using bigint = mpz_class;

class rat {
    mpq_class q_;

public:
    rat() : q_(0) {}
    rat(int n) : q_(n) {}
    rat(long n) : q_(n) {}
    rat(const bigint& n) : q_(n) {}
    explicit rat(mpq_class v) : q_(std::move(v)) { q_.canonicalize(); }

    rat(long num, long den) : q_(num, den) {
        if (den == 0) throw std::domain_error("rat: zero denominator");
        q_.canonicalize();
    }
    rat(const bigint& num, const bigint& den) : q_(num, den) {
        if (den == 0) throw std::domain_error("rat: zero denominator");
        q_.canonicalize();
    }

    const mpq_class& raw() const { return q_; }
    bigint num() const { return q_.get_num(); }
    bigint den() const { return q_.get_den(); }

    bool is_zero() const { return sgn(q_) == 0; }
    bool is_integer() const { return q_.get_den() == 1; }
    int sign() const { return sgn(q_); }

    rat operator-() const { return rat(mpq_class(-q_)); }
    friend rat operator+(const rat& a, const rat& b) { return rat(mpq_class(a.q_ + b.q_)); }
    friend rat operator-(const rat& a, const rat& b) { return rat(mpq_class(a.q_ - b.q_)); }
    friend rat operator*(const rat& a, const rat& b) { return rat(mpq_class(a.q_ * b.q_)); }
    friend rat operator/(const rat& a, const rat& b) {
        if (b.is_zero()) throw std::domain_error("rat: division by zero");
        return rat(mpq_class(a.q_ / b.q_));
    }
    rat& operator+=(const rat& o) { q_ += o.q_; return *this; }
    rat& operator-=(const rat& o) { q_ -= o.q_; return *this; }
    rat& operator*=(const rat& o) { q_ *= o.q_; return *this; }

    friend bool operator==(const rat& a, const rat& b) { return mpq_equal(a.q_.get_mpq_t(), b.q_.get_mpq_t()) != 0; }
    friend bool operator!=(const rat& a, const rat& b) { return !(a == b); }
    friend bool operator<(const rat& a, const rat& b) { return cmp(a.q_, b.q_) < 0; }
    friend bool operator<=(const rat& a, const rat& b) { return cmp(a.q_, b.q_) <= 0; }
    friend bool operator>(const rat& a, const rat& b) { return cmp(a.q_, b.q_) > 0; }
    friend bool operator>=(const rat& a, const rat& b) { return cmp(a.q_, b.q_) >= 0; }

    rat abs() const { return sign() < 0 ? -*this : *this; }

    // 2^e for any integer e.
    static rat pow2(long e) {
        mpz_class p;
        mpz_ui_pow_ui(p.get_mpz_t(), 2, static_cast<unsigned long>(e < 0 ? -e : e));
        if (e >= 0) return rat(p);
        return rat(bigint(1), p);
    }

    bigint floor() const {
        bigint f;
        mpz_fdiv_q(f.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
        return f;
    }
    bigint ceil() const {
        bigint c;
        mpz_cdiv_q(c.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
        return c;
    }

    // "p" for integers, "p/q" otherwise; always reduced form.
    std::string str() const {
        if (is_integer()) return q_.get_num().get_str();
        return q_.get_num().get_str() + "/" + q_.get_den().get_str();
    }

    // Fixed-point decimal rendering, round half away from zero. Deterministic
    // across platforms; used only for the human-readable CSV column.
    std::string decimal(int frac_digits = 9) const {
        bigint scale;
        mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(frac_digits));
        bigint n = num() * scale, d = den(), quo, rem;
        mpz_tdiv_qr(quo.get_mpz_t(), rem.get_mpz_t(), n.get_mpz_t(), d.get_mpz_t());
        bigint rem2 = ::abs(rem) * 2;
        if (rem2 >= ::abs(d)) quo += (sgn(n) < 0) == (sgn(d) < 0) ? 1 : -1;
        bool neg = quo < 0;
        bigint a = ::abs(quo);
        bigint ip = a / scale, fp = a % scale;
        std::string frac = fp.get_str();
        frac.insert(0, static_cast<size_t>(frac_digits) - frac.size(), '0');
        return (neg ? "-" : "") + ip.get_str() + "." + frac;
    }

    double approx() const { return q_.get_d(); }

    // Accepts "p", "p/q", decimals like "-0.25", with optional sign.
    static std::optional<rat> parse(std::string_view s) {
        auto is_digits = [](std::string_view t) {
            if (t.empty()) return false;
            for (char c : t)
                if (c < '0' || c > '9') return false;
            return true;
        };
        bool neg = false;
        if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
            neg = s[0] == '-';
            s.remove_prefix(1);
        }
        auto slash = s.find('/');
        auto dot = s.find('.');
        rat out;
        if (slash != std::string_view::npos) {
            std::string_view p = s.substr(0, slash), q = s.substr(slash + 1);
            if (!is_digits(p) || !is_digits(q)) return std::nullopt;
            bigint num{std::string(p)};
            bigint den{std::string(q)};
            if (den == 0) return std::nullopt;
            out = rat(num, den);
        } else if (dot != std::string_view::npos) {
            std::string_view ip = s.substr(0, dot), fp = s.substr(dot + 1);
            if (ip.empty()) ip = "0";
            if (!is_digits(ip) || !is_digits(fp)) return std::nullopt;
            bigint scale;
            mpz_ui_pow_ui(scale.get_mpz_t(), 10, fp.size());
            bigint num = bigint(std::string(ip)) * scale + bigint(std::string(fp));
            out = rat(num, scale);
        } else {
            if (!is_digits(s)) return std::nullopt;
            out = rat(bigint(std::string(s)));
        }
        return neg ? -out : out;
    }
};

inline rat rmin(const rat& a, const rat& b) { return a < b ? a : b; }
inline rat rmax(const rat& a, const rat& b) { return a < b ? b : a; }

// Nearest multiple of 2^-level in [0,1], ties rounded up. Used by the market
// maker's grid snapping; must be bit-deterministic.
inline rat snap_dyadic(const rat& v, long level) {
    rat clamped = rmax(rat(0), rmin(rat(1), v));
    rat scaled = clamped * rat::pow2(level);
    bigint n = (scaled + rat(1, 2)).floor();
    rat out = rat(n) * rat::pow2(-level);
    return rmax(rat(0), rmin(rat(1), out));
}

} // namespace lia
