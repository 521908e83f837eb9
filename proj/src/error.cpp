#include "crocodai/error.hpp"

namespace crocodai {

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::duplicate_name: return "duplicate_name";
        case Errc::unknown_chain: return "unknown_chain";
        case Errc::unknown_account: return "unknown_account";
        case Errc::unknown_token: return "unknown_token";
        case Errc::unknown_cdp: return "unknown_cdp";
        case Errc::unknown_transfer: return "unknown_transfer";
        case Errc::insufficient_balance: return "insufficient_balance";
        case Errc::invalid_amount: return "invalid_amount";
        case Errc::unauthorized: return "unauthorized";
        case Errc::not_compromised: return "not_compromised";
        case Errc::wrong_chain: return "wrong_chain";
        case Errc::liquidation_ratio: return "liquidation_ratio";
        case Errc::debt_ceiling: return "debt_ceiling";
        case Errc::over_repay: return "over_repay";
        case Errc::nonzero_debt: return "nonzero_debt";
        case Errc::invalid_state: return "invalid_state";
        case Errc::not_liquidatable: return "not_liquidatable";
        case Errc::bid_too_low: return "bid_too_low";
        case Errc::auction_expired: return "auction_expired";
        case Errc::auction_open: return "auction_open";
        case Errc::stale_price: return "stale_price";
        case Errc::quorum_violation: return "quorum_violation";
        case Errc::stale_nonce: return "stale_nonce";
        case Errc::invalid_parameter: return "invalid_parameter";
        case Errc::parse_error: return "parse_error";
        case Errc::schema_error: return "schema_error";
        case Errc::insufficient_data: return "insufficient_data";
        case Errc::zero_variance: return "zero_variance";
        case Errc::not_positive_definite: return "not_positive_definite";
        case Errc::infeasible: return "infeasible";
        case Errc::precondition: return "precondition";
    }
    return "unknown";
}

}  // namespace crocodai
