#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "routegraph/pay402.hpp"

using namespace routegraph;
using namespace routegraph::pay402;

namespace {

struct Harness {
    VirtualClock clock{1'000'000};
    std::shared_ptr<MockSettlementAdapter> adapter = std::make_shared<MockSettlementAdapter>();
    Wallet alice{"alice", "alice-secret"};
    Wallet bob{"bob", "bob-secret"};
    PaymentGate gate;

    Harness() : gate(adapter, clock, 12345) {
        adapter->register_wallet(alice);
        adapter->register_wallet(bob);
    }
};

} // namespace

TEST_CASE("challenges carry fresh unique nonces and a 60s expiry") {
    Harness h;
    auto t1 = h.gate.challenge("/v1/skills/search", 2'000);
    auto t2 = h.gate.challenge("/v1/skills/search", 2'000);
    CHECK(t1.nonce != t2.nonce);
    CHECK(t1.nonce.size() == 32); // 128-bit hex
    CHECK(t1.amount == 2'000);
    CHECK(t1.expires_at == h.clock.now_ms() + 60'000);

    auto body = PaymentGate::terms_body(t1);
    CHECK(body["payment_required"] == true);
    CHECK(body["terms"]["nonce"] == t1.nonce);
}

TEST_CASE("sign_proof is deterministic per wallet and differs across wallets") {
    Harness h;
    auto terms = h.gate.challenge("/v1/skills/abc/install", 7'500);
    auto p1 = sign_proof(terms, h.alice);
    auto p2 = sign_proof(terms, h.alice);
    CHECK(p1.signature == p2.signature);
    CHECK(p1.terms_digest == terms.digest());

    auto p3 = sign_proof(terms, h.bob);
    CHECK(p3.signature != p1.signature); // keyed MAC

    Wallet empty;
    CHECK_THROWS_AS(sign_proof(terms, empty), UnknownWallet);
}

TEST_CASE("valid proof settles and records the payer") {
    Harness h;
    auto terms = h.gate.challenge("/v1/skills/abc/install", 7'500);
    auto settlement = h.gate.verify_and_settle(sign_proof(terms, h.alice), terms, "escrow");
    CHECK(settlement.payer == "alice");
    CHECK(settlement.terms.amount == 7'500);
    CHECK_FALSE(settlement.settlement_id.empty());
}

TEST_CASE("replaying a settled proof raises Replay") {
    Harness h;
    auto terms = h.gate.challenge("/r", 1'000);
    auto proof = sign_proof(terms, h.alice);
    h.gate.verify_and_settle(proof, terms, "escrow");
    CHECK_THROWS_AS(h.gate.verify_and_settle(proof, terms, "escrow"), Replay);
}

TEST_CASE("a proof presented after expiry raises Expired") {
    Harness h;
    auto terms = h.gate.challenge("/r", 1'000);
    auto proof = sign_proof(terms, h.alice);
    h.clock.advance(60'001);
    CHECK_THROWS_AS(h.gate.verify_and_settle(proof, terms, "escrow"), Expired);
}

TEST_CASE("tampering with any terms field invalidates the proof") {
    Harness h;
    auto terms = h.gate.challenge("/r", 1'000);
    auto proof = sign_proof(terms, h.alice);

    auto tampered_amount = terms;
    tampered_amount.amount = 1; // cheaper copy, original signature
    CHECK_THROWS_AS(h.gate.verify_and_settle(proof, tampered_amount, "escrow"), BadSignature);

    auto tampered_resource = terms;
    tampered_resource.resource = "/other";
    CHECK_THROWS_AS(h.gate.verify_and_settle(proof, tampered_resource, "escrow"), BadSignature);

    auto tampered_expiry = terms;
    tampered_expiry.expires_at += 1'000'000;
    CHECK_THROWS_AS(h.gate.verify_and_settle(proof, tampered_expiry, "escrow"), BadSignature);
}

TEST_CASE("re-signing tampered terms still fails: they were never issued") {
    Harness h;
    auto terms = h.gate.challenge("/r", 5'000);
    auto cheaper = terms;
    cheaper.amount = 1;
    auto proof = sign_proof(cheaper, h.alice); // self-signed altered terms, same nonce
    CHECK_THROWS_AS(h.gate.verify_and_settle(proof, cheaper, "escrow"), AmountMismatch);
}

TEST_CASE("unknown wallets fail signature verification") {
    Harness h;
    auto terms = h.gate.challenge("/r", 1'000);
    Wallet mallory{"mallory", "mallory-secret"}; // never registered with the adapter
    auto proof = sign_proof(terms, mallory);
    CHECK_THROWS_AS(h.gate.verify_and_settle(proof, terms, "escrow"), BadSignature);
}

TEST_CASE("proof header value round trips through base64") {
    Harness h;
    auto terms = h.gate.challenge("/r", 1'000);
    auto proof = sign_proof(terms, h.alice);
    auto parsed = PaymentProof::from_header_value(proof.to_header_value());
    REQUIRE(parsed.has_value());
    CHECK(parsed->payer == proof.payer);
    CHECK(parsed->terms_digest == proof.terms_digest);
    CHECK(parsed->signature == proof.signature);
    CHECK_FALSE(PaymentProof::from_header_value("!!!not-base64!!!").has_value());
}

TEST_CASE("issued terms are retrievable by digest") {
    Harness h;
    auto terms = h.gate.challenge("/r", 1'000);
    auto found = h.gate.issued_terms(terms.digest());
    REQUIRE(found.has_value());
    CHECK(found->nonce == terms.nonce);
    CHECK_FALSE(h.gate.issued_terms("no-such-digest").has_value());
}

TEST_CASE("exactly one of many concurrent settles for one nonce succeeds") {
    Harness h;
    auto terms = h.gate.challenge("/contested", 3'000);
    auto proof = sign_proof(terms, h.alice);

    constexpr int kThreads = 16;
    std::atomic<int> successes{0}, replays{0};
    std::vector<std::thread> threads;
    threads.reserve(kThreads);
    for (int i = 0; i < kThreads; ++i) {
        threads.emplace_back([&] {
            try {
                h.gate.verify_and_settle(proof, terms, "escrow");
                successes.fetch_add(1);
            } catch (const Replay&) {
                replays.fetch_add(1);
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(successes.load() == 1);
    CHECK(replays.load() == kThreads - 1);
}

TEST_CASE("wallet files persist privately") {
    auto path = (std::filesystem::temp_directory_path() / "rg_wallet_test.json").string();
    std::filesystem::remove(path);
    Wallet w{"w-1", "secret-bytes"};
    w.save(path);
    auto loaded = Wallet::load(path);
    CHECK(loaded.id == w.id);
    CHECK(loaded.secret == w.secret);
    auto mode = std::filesystem::status(path).permissions();
    CHECK((mode & std::filesystem::perms::others_read) == std::filesystem::perms::none);
    std::filesystem::remove(path);
}
