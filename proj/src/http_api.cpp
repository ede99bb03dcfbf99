#include "routegraph/http_api.hpp"

#include <mutex>

#include <httplib.h>

namespace routegraph::orch {

namespace {

std::optional<std::string> proof_header_of(const httplib::Request& req) {
    if (!req.has_header(pay402::kProofHeader)) return std::nullopt;
    return req.get_header_value(pay402::kProofHeader);
}

void reply(httplib::Response& res, const RegistryService::Reply& r) {
    res.status = r.status;
    res.set_content(canonical_dump(r.body), "application/json");
}

} // namespace

HttpApiServer::HttpApiServer(RegistryService& service, Orchestrator* orchestrator)
    : service_(service), orchestrator_(orchestrator), server_(std::make_unique<httplib::Server>()) {

    server_->Get("/v1/skills/search", [this](const httplib::Request& req, httplib::Response& res) {
        std::string query = req.get_param_value("q");
        std::size_t k = 5;
        if (req.has_param("k")) {
            k = static_cast<std::size_t>(std::stoul(req.get_param_value("k")));
        }
        reply(res, service_.handle_search(query, k, proof_header_of(req)));
    });

    server_->Get(R"(/v1/skills/([^/]+)/install)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                     reply(res, service_.handle_install(req.matches[1], proof_header_of(req)));
                 });

    server_->Post("/v1/skills", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            res.status = 400;
            res.set_content(R"({"error":"malformed-json"})", "application/json");
            return;
        }
        reply(res, service_.handle_publish(body));
    });

    server_->Post("/v1/intent/resolve",
                  [this](const httplib::Request& req, httplib::Response& res) {
                      if (!orchestrator_) {
                          res.status = 404;
                          res.set_content(R"({"error":"no-orchestrator"})", "application/json");
                          return;
                      }
                      auto body = nlohmann::json::parse(req.body, nullptr, false);
                      if (body.is_discarded()) {
                          res.status = 400;
                          res.set_content(R"({"error":"malformed-json"})", "application/json");
                          return;
                      }
                      try {
                          // one intent pipeline at a time; the orchestrator's
                          // internal state is single-writer
                          static std::mutex resolve_mutex;
                          std::lock_guard lock(resolve_mutex);
                          auto result =
                              orchestrator_->resolve_intent(IntentQuery::from_json(body));
                          res.status = 200;
                          res.set_content(canonical_dump(result.to_json()), "application/json");
                      } catch (const Error& err) {
                          res.status = 422;
                          res.set_content(canonical_dump(nlohmann::json{
                                              {"error", err.code()}, {"message", err.what()}}),
                                          "application/json");
                      }
                  });
}

HttpApiServer::~HttpApiServer() {
    stop();
}

int HttpApiServer::start() {
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void HttpApiServer::stop() {
    if (server_ && server_->is_running()) {
        server_->stop();
    }
    if (thread_.joinable()) {
        thread_.join();
    }
}

HttpRegistryClient::HttpRegistryClient(std::string host, int port, pay402::Wallet wallet)
    : http_(std::make_unique<httplib::Client>(host, port)), wallet_(std::move(wallet)) {}

HttpRegistryClient::~HttpRegistryClient() = default;

SearchResponse HttpRegistryClient::search(const std::string& query, std::size_t k) {
    std::string path = "/v1/skills/search?q=" + httplib::detail::encode_url(query) +
                       "&k=" + std::to_string(k);
    ++requests_;
    auto first = http_->Get(path);
    if (!first) throw PaymentRefused("registry unreachable");

    SearchResponse out;
    auto body = nlohmann::json::parse(first->body, nullptr, false);
    if (first->status == 200 && !body.is_discarded()) {
        // ungated or empty index: no handshake needed
        out.empty_index = body.value("empty_index", false);
        for (const auto& r : body.value("results", nlohmann::json::array())) {
            graph::ScoredResult sr;
            sr.id = r.value("id", "");
            sr.domain = r.value("domain", "");
            sr.composite = r.value("composite", 0.0);
            const auto& c = r.value("components", nlohmann::json::object());
            sr.components = {c.value("similarity", 0.0), c.value("reliability", 0.0),
                             c.value("freshness", 0.0), c.value("verification", 0.0)};
            sr.lifecycle = graph::lifecycle_from_name(r.value("lifecycle", "active"));
            out.results.push_back(std::move(sr));
        }
        return out;
    }
    if (first->status != 402 || body.is_discarded()) {
        throw PaymentRefused("unexpected search status " + std::to_string(first->status));
    }

    auto terms = pay402::PaymentTerms::from_json(body["terms"]);
    auto proof = pay402::sign_proof(terms, wallet_);
    httplib::Headers headers{{pay402::kProofHeader, proof.to_header_value()}};
    ++requests_;
    auto second = http_->Get(path, headers);
    if (!second) throw PaymentRefused("registry unreachable");
    auto paid = nlohmann::json::parse(second->body, nullptr, false);
    if (second->status != 200 || paid.is_discarded()) {
        std::string code = paid.is_discarded() ? "payment-refused" : paid.value("error", "");
        if (code == "replay") throw pay402::Replay("replayed proof");
        if (code == "bad-signature") throw pay402::BadSignature("bad signature");
        if (code == "expired") throw pay402::Expired("expired terms");
        if (code == "amount-mismatch") throw pay402::AmountMismatch("amount mismatch");
        throw PaymentRefused("search payment rejected");
    }

    for (const auto& r : paid.value("results", nlohmann::json::array())) {
        graph::ScoredResult sr;
        sr.id = r.value("id", "");
        sr.domain = r.value("domain", "");
        sr.composite = r.value("composite", 0.0);
        const auto& c = r.value("components", nlohmann::json::object());
        sr.components = {c.value("similarity", 0.0), c.value("reliability", 0.0),
                         c.value("freshness", 0.0), c.value("verification", 0.0)};
        sr.lifecycle = graph::lifecycle_from_name(r.value("lifecycle", "active"));
        out.results.push_back(std::move(sr));
    }
    if (paid.contains("fee_ref")) out.fee_ref = paid["fee_ref"].get<std::string>();
    return out;
}

InstallResponse HttpRegistryClient::install(const std::string& record_id) {
    std::string path = "/v1/skills/" + record_id + "/install";
    ++requests_;
    auto first = http_->Get(path);
    if (!first) throw PaymentRefused("registry unreachable");
    if (first->status == 404) throw Unresolvable("record not found: " + record_id);
    auto body = nlohmann::json::parse(first->body, nullptr, false);
    if (first->status == 200 && !body.is_discarded()) {
        InstallResponse out;
        out.package = distill::SkillPackage::from_publishable_json(body["package"]);
        out.record = graph::SkillRecord::from_json(body["record"]);
        return out;
    }
    if (first->status != 402 || body.is_discarded()) {
        throw PaymentRefused("unexpected install status " + std::to_string(first->status));
    }

    auto terms = pay402::PaymentTerms::from_json(body["terms"]);
    auto proof = pay402::sign_proof(terms, wallet_);
    httplib::Headers headers{{pay402::kProofHeader, proof.to_header_value()}};
    ++requests_;
    auto second = http_->Get(path, headers);
    if (!second) throw PaymentRefused("registry unreachable");
    auto paid = nlohmann::json::parse(second->body, nullptr, false);
    if (second->status != 200 || paid.is_discarded()) {
        throw PaymentRefused("install payment rejected");
    }

    InstallResponse out;
    out.package = distill::SkillPackage::from_publishable_json(paid["package"]);
    out.record = graph::SkillRecord::from_json(paid["record"]);
    if (paid.contains("fee_ref")) out.fee_ref = paid["fee_ref"].get<std::string>();
    return out;
}

graph::PublishOutcome HttpRegistryClient::publish(const distill::SkillPackage& pkg) {
    ++requests_;
    auto res = http_->Post("/v1/skills", canonical_dump(pkg.to_publishable_json()),
                           "application/json");
    if (!res) throw PaymentRefused("registry unreachable");
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (res->status != 200 || body.is_discarded()) {
        throw graph::ValidationFailed(
            body.is_discarded() ? std::vector<std::string>{}
                                : body.value("hard_failures", std::vector<std::string>{}),
            "publish rejected");
    }
    graph::PublishOutcome out;
    out.record_id = body.value("record_id", "");
    out.merged = body.value("merged", false);
    out.delta_score = body.value("delta_score", 0.0);
    out.added_schema_lines = body.value("added_schema_lines", 0);
    return out;
}

} // namespace routegraph::orch
