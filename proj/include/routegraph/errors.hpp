#pragma once

#include <stdexcept>
#include <string>

namespace routegraph {

// Base for all domain errors. `code()` is a stable machine-readable
// identifier used for CLI exit-code mapping and JSON error bodies.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define ROUTEGRAPH_DEFINE_ERROR(NAME, CODE)                                    \
    class NAME : public ::routegraph::Error {                                  \
    public:                                                                    \
        explicit NAME(const std::string& message)                              \
            : ::routegraph::Error(CODE, message) {}                            \
    }

namespace capture {
ROUTEGRAPH_DEFINE_ERROR(MalformedArchive, "malformed-archive");
ROUTEGRAPH_DEFINE_ERROR(EmptyArchive, "empty-archive");
} // namespace capture

namespace distill {
ROUTEGRAPH_DEFINE_ERROR(NotStructured, "not-structured");
ROUTEGRAPH_DEFINE_ERROR(NoApiEntries, "no-api-entries");
ROUTEGRAPH_DEFINE_ERROR(DomainMismatch, "domain-mismatch");
} // namespace distill

namespace graph {
ROUTEGRAPH_DEFINE_ERROR(EmptyIndex, "empty-index");
} // namespace graph

namespace trust {
ROUTEGRAPH_DEFINE_ERROR(NegativeAge, "negative-age");
} // namespace trust

namespace econ {
ROUTEGRAPH_DEFINE_ERROR(NoAttributions, "no-attributions");
ROUTEGRAPH_DEFINE_ERROR(Unamortizable, "unamortizable");
ROUTEGRAPH_DEFINE_ERROR(InvalidSplit, "invalid-split");
} // namespace econ

namespace pay402 {
ROUTEGRAPH_DEFINE_ERROR(UnknownWallet, "unknown-wallet");
ROUTEGRAPH_DEFINE_ERROR(BadSignature, "bad-signature");
ROUTEGRAPH_DEFINE_ERROR(Expired, "expired");
ROUTEGRAPH_DEFINE_ERROR(Replay, "replay");
ROUTEGRAPH_DEFINE_ERROR(AmountMismatch, "amount-mismatch");
} // namespace pay402

namespace simnet {
ROUTEGRAPH_DEFINE_ERROR(NotFound, "not-found");
ROUTEGRAPH_DEFINE_ERROR(BotBlocked, "bot-blocked");
} // namespace simnet

namespace orch {
ROUTEGRAPH_DEFINE_ERROR(Unresolvable, "unresolvable");
ROUTEGRAPH_DEFINE_ERROR(PaymentRefused, "payment-refused");
ROUTEGRAPH_DEFINE_ERROR(AuthMissing, "auth-missing");
ROUTEGRAPH_DEFINE_ERROR(EndpointFailed, "endpoint-failed");
ROUTEGRAPH_DEFINE_ERROR(DiscoveryEmpty, "discovery-empty");
} // namespace orch

#undef ROUTEGRAPH_DEFINE_ERROR

} // namespace routegraph
