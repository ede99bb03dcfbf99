#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "routegraph/econ.hpp"
#include "routegraph/errors.hpp"
#include "routegraph/util.hpp"

namespace routegraph::pay402 {

inline constexpr const char* kProofHeader = "X-Payment-Proof";
inline constexpr time_ms kDefaultExpiryMs = 60'000;

struct PaymentTerms {
    micro_t amount = 0;
    std::string currency = "USDC";
    std::string network = "mock";
    std::string resource;
    std::string nonce; // 128-bit, hex
    time_ms expires_at = 0;

    nlohmann::json to_json() const;
    static PaymentTerms from_json(const nlohmann::json& j);

    // sorted-key serialization; the byte string proofs bind to
    std::string canonical() const;
    std::string digest() const; // sha256 hex of canonical()
};

struct PaymentProof {
    std::string payer;        // wallet id
    std::string terms_digest; // binds the proof to exact terms
    std::string signature;    // keyed MAC over terms_digest

    nlohmann::json to_json() const;
    static PaymentProof from_json(const nlohmann::json& j);

    std::string to_header_value() const; // base64 of canonical JSON
    static std::optional<PaymentProof> from_header_value(const std::string& value);
};

struct Wallet {
    std::string id;
    std::string secret;

    nlohmann::json to_json() const;
    static Wallet from_json(const nlohmann::json& j);
    static Wallet load(const std::string& path);
    void save(const std::string& path) const;
};

PaymentProof sign_proof(const PaymentTerms& terms, const Wallet& wallet);

// Settlement backend seam. The mock adapter verifies keyed-MAC signatures
// against a shared wallet directory; a production adapter would verify and
// settle on-chain behind the same interface.
class SettlementAdapter {
public:
    virtual ~SettlementAdapter() = default;
    virtual bool verify(const std::string& payer, const std::string& terms_digest,
                        const std::string& signature) const = 0;
    virtual std::string settle(const std::string& payer, const std::string& payee, micro_t amount,
                               const std::string& reference) = 0;
};

class MockSettlementAdapter final : public SettlementAdapter {
public:
    void register_wallet(const Wallet& wallet);
    bool verify(const std::string& payer, const std::string& terms_digest,
                const std::string& signature) const override;
    std::string settle(const std::string& payer, const std::string& payee, micro_t amount,
                       const std::string& reference) override;

private:
    std::map<std::string, std::string> secrets_;
    std::map<std::string, micro_t> settled_;
    int counter_ = 0;
};

struct Settlement {
    std::string settlement_id;
    PaymentTerms terms;
    std::string payer;
};

// Server-side challenge issue and settle with single-use nonces.
class PaymentGate {
public:
    PaymentGate(std::shared_ptr<SettlementAdapter> adapter, const Clock& clock,
                std::uint64_t nonce_seed = 0);

    // Registers fresh terms with a unique nonce and default 60 s expiry.
    PaymentTerms challenge(const std::string& resource, micro_t fee);

    // Checks signature, amount, expiry and nonce single-use, in that order;
    // consumes the nonce and settles via the adapter on success.
    Settlement verify_and_settle(const PaymentProof& proof, const PaymentTerms& terms,
                                 const std::string& payee);

    // Looks up issued terms by digest so a proof alone identifies its challenge.
    std::optional<PaymentTerms> issued_terms(const std::string& digest) const;

    // HTTP shapes for the 402 handshake.
    static nlohmann::json terms_body(const PaymentTerms& terms);

private:
    struct Issued {
        PaymentTerms terms;
        bool consumed = false;
    };

    std::shared_ptr<SettlementAdapter> adapter_;
    const Clock& clock_;
    std::mt19937_64 rng_;
    std::uint64_t issue_counter_ = 0;
    std::map<std::string, Issued> by_nonce_;
    std::map<std::string, std::string> nonce_by_digest_;
    mutable std::mutex mutex_;
};

} // namespace routegraph::pay402
