#include "routegraph/pay402.hpp"

#include <cstdio>

namespace routegraph::pay402 {

nlohmann::json PaymentTerms::to_json() const {
    return nlohmann::json{{"amount", amount},     {"currency", currency},
                          {"network", network},   {"resource", resource},
                          {"nonce", nonce},       {"expires_at", expires_at}};
}

PaymentTerms PaymentTerms::from_json(const nlohmann::json& j) {
    PaymentTerms t;
    t.amount = j.value("amount", static_cast<micro_t>(0));
    t.currency = j.value("currency", "USDC");
    t.network = j.value("network", "mock");
    t.resource = j.value("resource", "");
    t.nonce = j.value("nonce", "");
    t.expires_at = j.value("expires_at", static_cast<time_ms>(0));
    return t;
}

std::string PaymentTerms::canonical() const {
    return canonical_dump(to_json());
}

std::string PaymentTerms::digest() const {
    return sha256_hex(canonical());
}

nlohmann::json PaymentProof::to_json() const {
    return nlohmann::json{
        {"payer", payer}, {"terms_digest", terms_digest}, {"signature", signature}};
}

PaymentProof PaymentProof::from_json(const nlohmann::json& j) {
    PaymentProof p;
    p.payer = j.value("payer", "");
    p.terms_digest = j.value("terms_digest", "");
    p.signature = j.value("signature", "");
    return p;
}

std::string PaymentProof::to_header_value() const {
    return base64_encode(canonical_dump(to_json()));
}

std::optional<PaymentProof> PaymentProof::from_header_value(const std::string& value) {
    auto decoded = base64_decode(value);
    if (!decoded) return std::nullopt;
    auto j = nlohmann::json::parse(*decoded, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return from_json(j);
}

nlohmann::json Wallet::to_json() const {
    return nlohmann::json{{"id", id}, {"secret", secret}};
}

Wallet Wallet::from_json(const nlohmann::json& j) {
    return {j.value("id", ""), j.value("secret", "")};
}

Wallet Wallet::load(const std::string& path) {
    return from_json(nlohmann::json::parse(read_file(path)));
}

void Wallet::save(const std::string& path) const {
    write_file_private(path, canonical_dump(to_json()) + "\n");
}

PaymentProof sign_proof(const PaymentTerms& terms, const Wallet& wallet) {
    if (wallet.id.empty() || wallet.secret.empty()) {
        throw UnknownWallet("wallet has no id or secret");
    }
    PaymentProof proof;
    proof.payer = wallet.id;
    proof.terms_digest = terms.digest();
    proof.signature = hmac_sha256_hex(wallet.secret, proof.terms_digest);
    return proof;
}

void MockSettlementAdapter::register_wallet(const Wallet& wallet) {
    secrets_[wallet.id] = wallet.secret;
}

bool MockSettlementAdapter::verify(const std::string& payer, const std::string& terms_digest,
                                   const std::string& signature) const {
    auto it = secrets_.find(payer);
    if (it == secrets_.end()) return false;
    return hmac_sha256_hex(it->second, terms_digest) == signature;
}

std::string MockSettlementAdapter::settle(const std::string& payer, const std::string& payee,
                                          micro_t amount, const std::string& reference) {
    settled_[payer] -= amount;
    settled_[payee] += amount;
    ++counter_;
    return "settle-" + std::to_string(counter_) + "-" +
           sha256_hex(payer + "|" + payee + "|" + reference).substr(0, 12);
}

PaymentGate::PaymentGate(std::shared_ptr<SettlementAdapter> adapter, const Clock& clock,
                         std::uint64_t nonce_seed)
    : adapter_(std::move(adapter)), clock_(clock) {
    if (nonce_seed == 0) {
        std::random_device rd;
        nonce_seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    rng_.seed(nonce_seed);
}

PaymentTerms PaymentGate::challenge(const std::string& resource, micro_t fee) {
    if (fee <= 0) {
        throw AmountMismatch("zero-fee resources are served without a challenge");
    }
    std::lock_guard lock(mutex_);
    PaymentTerms terms;
    terms.amount = fee;
    terms.resource = resource;
    // 128-bit nonce; the issue counter guarantees uniqueness per gate
    ++issue_counter_;
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                  static_cast<unsigned long long>(rng_()),
                  static_cast<unsigned long long>(rng_() ^ issue_counter_));
    terms.nonce = buf;
    terms.expires_at = clock_.now_ms() + kDefaultExpiryMs;

    by_nonce_[terms.nonce] = {terms, false};
    nonce_by_digest_[terms.digest()] = terms.nonce;
    return terms;
}

Settlement PaymentGate::verify_and_settle(const PaymentProof& proof, const PaymentTerms& terms,
                                          const std::string& payee) {
    std::lock_guard lock(mutex_);

    // 1. signature: the proof must bind the presented terms, and the MAC
    //    must verify for the claimed payer
    std::string presented_digest = terms.digest();
    if (proof.terms_digest != presented_digest) {
        throw BadSignature("proof does not bind the presented terms");
    }
    if (!adapter_->verify(proof.payer, proof.terms_digest, proof.signature)) {
        throw BadSignature("signature verification failed");
    }

    // the presented terms must match terms this gate actually issued
    auto nit = by_nonce_.find(terms.nonce);
    if (nit == by_nonce_.end()) {
        throw BadSignature("terms were never issued");
    }
    Issued& issued = nit->second;

    // 2. amount
    if (terms.amount != issued.terms.amount) {
        throw AmountMismatch("amount differs from issued terms");
    }
    if (issued.terms.canonical() != terms.canonical()) {
        throw BadSignature("terms do not match issued challenge");
    }

    // 3. expiry
    if (clock_.now_ms() > issued.terms.expires_at) {
        throw Expired("payment terms expired");
    }

    // 4. single-use nonce
    if (issued.consumed) {
        throw Replay("nonce already consumed");
    }
    issued.consumed = true;

    Settlement settlement;
    settlement.terms = issued.terms;
    settlement.payer = proof.payer;
    settlement.settlement_id =
        adapter_->settle(proof.payer, payee, issued.terms.amount, issued.terms.resource);
    return settlement;
}

std::optional<PaymentTerms> PaymentGate::issued_terms(const std::string& digest) const {
    std::lock_guard lock(mutex_);
    auto it = nonce_by_digest_.find(digest);
    if (it == nonce_by_digest_.end()) return std::nullopt;
    auto nit = by_nonce_.find(it->second);
    if (nit == by_nonce_.end()) return std::nullopt;
    return nit->second.terms;
}

nlohmann::json PaymentGate::terms_body(const PaymentTerms& terms) {
    return nlohmann::json{{"payment_required", true}, {"terms", terms.to_json()}};
}

} // namespace routegraph::pay402
