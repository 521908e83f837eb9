#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crocodai {

enum class Errc {
    duplicate_name,
    unknown_chain,
    unknown_account,
    unknown_token,
    unknown_cdp,
    unknown_transfer,
    insufficient_balance,
    invalid_amount,
    unauthorized,
    not_compromised,
    wrong_chain,
    liquidation_ratio,
    debt_ceiling,
    over_repay,
    nonzero_debt,
    invalid_state,
    not_liquidatable,
    bid_too_low,
    auction_expired,
    auction_open,
    stale_price,
    quorum_violation,
    stale_nonce,
    invalid_parameter,
    parse_error,
    schema_error,
    insufficient_data,
    zero_variance,
    not_positive_definite,
    infeasible,
    precondition,
};

std::string_view errc_name(Errc code);

/// Thrown by every module for contract violations the caller can act on.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace crocodai
