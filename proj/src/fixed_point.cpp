#include "crocodai/fixed_point.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <system_error>

namespace crocodai {
namespace {

using Raw = __int128;

// Parses [-+]digits[.digits][e[-+]digits] into an integer scaled by 10^decimals.
// Digits past the precision must be zero unless `round` is set, in which case
// the value is rounded half away from zero.
Raw parse_scaled(std::string_view text, int decimals, bool round) {
    const std::string original(text);
    auto fail = [&](const char* why) {
        throw std::invalid_argument("invalid decimal '" + original + "': " + why);
    };
    if (text.empty()) fail("empty");
    bool negative = false;
    if (text.front() == '-' || text.front() == '+') {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    std::string digits;
    int point_shift = 0;
    bool seen_point = false;
    std::size_t i = 0;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (c >= '0' && c <= '9') {
            digits.push_back(c);
            if (seen_point) ++point_shift;
        } else if (c == '.' && !seen_point) {
            seen_point = true;
        } else {
            break;
        }
    }
    if (digits.empty()) fail("no digits");
    int exponent = 0;
    if (i < text.size()) {
        if (text[i] != 'e' && text[i] != 'E') fail("unexpected character");
        ++i;
        const char* first = text.data() + i;
        const char* last = text.data() + text.size();
        if (first != last && *first == '+') ++first;
        auto [ptr, ec] = std::from_chars(first, last, exponent);
        if (ec != std::errc{} || ptr != last) fail("bad exponent");
    }
    // value = digits * 10^(exponent - point_shift); want value * 10^decimals.
    const int shift = exponent - point_shift + decimals;
    std::string kept = digits;
    std::string dropped;
    if (shift < 0) {
        const std::size_t cut = static_cast<std::size_t>(-shift);
        if (cut >= kept.size()) {
            dropped = std::string(cut - kept.size(), '0') + kept;
            kept = "0";
        } else {
            dropped = kept.substr(kept.size() - cut);
            kept.resize(kept.size() - cut);
        }
    } else {
        kept.append(static_cast<std::size_t>(shift), '0');
    }
    if (kept.size() > 38) fail("out of range");
    Raw value = 0;
    for (char c : kept) value = value * 10 + (c - '0');
    if (!dropped.empty()) {
        const bool nonzero = dropped.find_first_not_of('0') != std::string::npos;
        if (nonzero && !round) fail("too many decimal places");
        if (round && dropped.front() >= '5') ++value;
    }
    return negative ? -value : value;
}

std::string format_scaled(Raw raw, int decimals) {
    const bool negative = raw < 0;
    unsigned __int128 mag = negative ? static_cast<unsigned __int128>(-raw) : static_cast<unsigned __int128>(raw);
    std::string s;
    do {
        s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(mag % 10)));
        mag /= 10;
    } while (mag != 0);
    if (static_cast<int>(s.size()) <= decimals) s.insert(0, static_cast<std::size_t>(decimals) + 1 - s.size(), '0');
    std::string int_part = s.substr(0, s.size() - static_cast<std::size_t>(decimals));
    std::string frac = s.substr(s.size() - static_cast<std::size_t>(decimals));
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    std::string out = negative ? "-" : "";
    out += int_part;
    if (!frac.empty()) out += "." + frac;
    return out;
}

std::string shortest(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::invalid_argument("unformattable double");
    return std::string(buf, ptr);
}

Raw round_div(const BigInt& num, const BigInt& den) {
    BigInt q = num / den;
    BigInt r = num % den;
    if (r != 0) {
        using boost::multiprecision::abs;
        if (abs(r) * 2 >= abs(den)) q += ((num < 0) != (den < 0)) ? -1 : 1;
    }
    return static_cast<Raw>(q);
}

}  // namespace

Amount parse_amount(std::string_view text) {
    const Raw v = parse_scaled(text, 9, false);
    if (v > std::numeric_limits<Amount>::max() || v < std::numeric_limits<Amount>::min())
        throw std::invalid_argument("amount out of range: " + std::string(text));
    return static_cast<Amount>(v);
}

std::string format_amount(Amount a) { return format_scaled(a, 9); }

Amount amount_from_double(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite amount");
    return static_cast<Amount>(parse_scaled(shortest(x), 9, true));
}

Wad Wad::parse(std::string_view text) { return from_raw(parse_scaled(text, 18, false)); }

Wad Wad::from_double(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite decimal");
    return from_raw(parse_scaled(shortest(x), 18, true));
}

double Wad::to_double() const {
    const Raw whole = raw_ / kScale;
    const Raw frac = raw_ % kScale;
    return static_cast<double>(whole) + static_cast<double>(frac) / 1e18;
}

std::string Wad::to_string() const { return format_scaled(raw_, 18); }

Rational Wad::to_rational() const { return Rational(BigInt(raw_), BigInt(kScale)); }

Amount Wad::ceil_amount() const {
    constexpr Raw k = 1'000'000'000;
    Raw q = raw_ / k;
    if (raw_ % k > 0) ++q;
    return static_cast<Amount>(q);
}

Amount Wad::floor_amount() const {
    constexpr Raw k = 1'000'000'000;
    Raw q = raw_ / k;
    if (raw_ % k < 0) --q;
    return static_cast<Amount>(q);
}

Wad Wad::operator*(Wad o) const { return from_raw(round_div(to_big(*this) * to_big(o), BigInt(kScale))); }

Wad Wad::operator/(Wad o) const {
    if (o.raw_ == 0) throw std::domain_error("Wad division by zero");
    return from_raw(round_div(to_big(*this) * BigInt(kScale), to_big(o)));
}

Wad compound(Wad rate, std::int64_t n) {
    if (n < 0) throw std::invalid_argument("negative exponent");
    Wad base = Wad::one() + rate;
    Wad result = Wad::one();
    while (n > 0) {
        if (n & 1) result = result * base;
        n >>= 1;
        if (n > 0) base = base * base;
    }
    return result;
}

bool ratio_exceeds(Wad price, Amount collateral, Wad debt, Wad ratio) {
    // price*c*10^-27 / (debt*10^-18) > ratio*10^-18  <=>  price*c*10^9 > ratio*debt
    return value_e27(price, collateral) * BigInt(1'000'000'000) > to_big(ratio) * to_big(debt);
}

}  // namespace crocodai
