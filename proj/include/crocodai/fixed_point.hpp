#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace crocodai {

/// Wide intermediate for exact products of fixed-point values.
using BigInt = boost::multiprecision::int256_t;
using Rational = boost::multiprecision::cpp_rational;

/// Stablecoin and collateral quantities: integer minor units, 10^9 per unit.
using Amount = std::int64_t;
inline constexpr Amount kCoin = 1'000'000'000;

/// Parses a decimal string ("12.5", "-3", "0.000000001") into minor units.
/// Throws std::invalid_argument on malformed input or more than 9 decimals.
Amount parse_amount(std::string_view text);
std::string format_amount(Amount a);
inline double amount_to_double(Amount a) { return static_cast<double>(a) / static_cast<double>(kCoin); }
Amount amount_from_double(double x);

/// Signed decimal with 18 fractional digits (a "wad"), backed by __int128.
/// Used for debt, prices, rates and protocol parameters.
class Wad {
public:
    using Raw = __int128;
    static constexpr Raw kScale = static_cast<Raw>(1'000'000'000'000'000'000LL);

    constexpr Wad() = default;

    static constexpr Wad from_raw(Raw raw) { Wad w; w.raw_ = raw; return w; }
    static constexpr Wad from_int(std::int64_t v) { return from_raw(static_cast<Raw>(v) * kScale); }
    static constexpr Wad one() { return from_raw(kScale); }
    static constexpr Wad zero() { return Wad{}; }
    /// Stablecoin minor units (10^9) widened to 18 decimals, exact.
    static constexpr Wad from_amount(Amount a) { return from_raw(static_cast<Raw>(a) * 1'000'000'000); }
    static Wad parse(std::string_view text);
    /// Nearest representable value; exact for decimals with <= 15 significant digits.
    static Wad from_double(double x);

    constexpr Raw raw() const { return raw_; }
    double to_double() const;
    std::string to_string() const;
    Rational to_rational() const;

    /// Minor units, rounding toward +infinity (debt owed is never understated).
    Amount ceil_amount() const;
    /// Minor units, rounding toward -infinity.
    Amount floor_amount() const;

    constexpr Wad operator+(Wad o) const { return from_raw(raw_ + o.raw_); }
    constexpr Wad operator-(Wad o) const { return from_raw(raw_ - o.raw_); }
    constexpr Wad operator-() const { return from_raw(-raw_); }
    Wad& operator+=(Wad o) { raw_ += o.raw_; return *this; }
    Wad& operator-=(Wad o) { raw_ -= o.raw_; return *this; }
    /// Product rounded half away from zero at the 18th decimal.
    Wad operator*(Wad o) const;
    /// Quotient rounded half away from zero at the 18th decimal.
    Wad operator/(Wad o) const;

    constexpr auto operator<=>(const Wad&) const = default;

private:
    Raw raw_ = 0;
};

/// (1 + rate)^n by repeated squaring, each product rounded half-up.
Wad compound(Wad rate, std::int64_t n);

inline BigInt to_big(Wad w) { return BigInt(w.raw()); }

/// Exact value of `amount` collateral tokens at `price`, scaled by 10^27.
inline BigInt value_e27(Wad price, Amount amount) { return to_big(price) * BigInt(amount); }

/// True iff price*collateral / debt > ratio, evaluated exactly.
/// Caller guarantees debt > 0.
bool ratio_exceeds(Wad price, Amount collateral, Wad debt, Wad ratio);

inline Rational amount_to_rational(Amount a) { return Rational(a, kCoin); }

}  // namespace crocodai
