#include "routegraph/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>

#include "routegraph/embedding.hpp"

namespace routegraph::orch {

nlohmann::json IntentQuery::to_json() const {
    nlohmann::json j{{"text", text}, {"params", params}};
    if (domain_hint) j["domain_hint"] = *domain_hint;
    return j;
}

IntentQuery IntentQuery::from_json(const nlohmann::json& j) {
    IntentQuery q;
    q.text = j.value("text", "");
    if (j.contains("domain_hint") && !j["domain_hint"].is_null()) {
        q.domain_hint = j["domain_hint"].get<std::string>();
    }
    q.params = j.value("params", std::map<std::string, std::string>{});
    return q;
}

std::string intent_key(const IntentQuery& q) {
    nlohmann::json canon{{"text", to_lower(q.text)},
                         {"domain", q.domain_hint.value_or("")},
                         {"params", q.params}}; // std::map keeps params sorted
    return sha256_hex(canonical_dump(canon));
}

RouteCache::RouteCache(std::string path) : path_(std::move(path)) {
    if (!path_.empty() && std::filesystem::exists(path_)) {
        auto j = nlohmann::json::parse(read_file(path_), nullptr, false);
        if (!j.is_discarded() && j.is_array()) {
            for (const auto& e : j) {
                RouteCacheEntry entry;
                entry.intent_key = e.value("intent_key", "");
                entry.skill_id = e.value("skill_id", "");
                entry.endpoint_key = e.value("endpoint_key", "");
                entry.resolved_at = e.value("resolved_at", static_cast<time_ms>(0));
                entry.ttl = e.value("ttl", static_cast<time_ms>(24LL * 60 * 60 * 1000));
                entries_[entry.intent_key] = std::move(entry);
            }
        }
    }
}

std::optional<RouteCacheEntry> RouteCache::get(const std::string& key, time_ms now) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    if (now - it->second.resolved_at >= it->second.ttl) {
        return std::nullopt; // expired at exactly ttl
    }
    return it->second;
}

void RouteCache::put(RouteCacheEntry entry) {
    entries_[entry.intent_key] = std::move(entry);
    persist();
}

void RouteCache::erase(const std::string& key) {
    entries_.erase(key);
    persist();
}

void RouteCache::persist() const {
    if (path_.empty()) return;
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [key, e] : entries_) {
        j.push_back({{"intent_key", e.intent_key},
                     {"skill_id", e.skill_id},
                     {"endpoint_key", e.endpoint_key},
                     {"resolved_at", e.resolved_at},
                     {"ttl", e.ttl}});
    }
    write_file(path_, canonical_dump(j) + "\n");
}

nlohmann::json ExecutionResult::to_json() const {
    return nlohmann::json{{"data", data},
                          {"timing", {{"total_ms", total_ms}, {"source", source}}},
                          {"fees_paid", fees_paid}};
}

// --- RegistryService --------------------------------------------------------

RegistryService::RegistryService(graph::Registry& registry, econ::Ledger& ledger,
                                 std::shared_ptr<pay402::SettlementAdapter> adapter,
                                 const Clock& clock, Config config, std::uint64_t nonce_seed)
    : registry_(registry), ledger_(ledger), gate_(std::move(adapter), clock, nonce_seed),
      clock_(clock), config_(std::move(config)) {}

std::int64_t RegistryService::recent_installs(const std::string& record_id) const {
    constexpr time_ms kWindow = 24LL * 60 * 60 * 1000;
    time_ms now = clock_.now_ms();
    std::int64_t count = 0;
    for (const auto& e : ledger_.entries()) {
        if (e.kind == econ::EntryKind::tier1 && e.reference == record_id &&
            now - e.timestamp <= kWindow) {
            ++count;
        }
    }
    return count;
}

namespace {

RegistryService::Reply payment_error(const Error& err) {
    return {err.code() == "replay" ? 409 : 400,
            nlohmann::json{{"error", err.code()}, {"message", err.what()}}};
}

} // namespace

RegistryService::Reply RegistryService::handle_search(
    const std::string& query, std::size_t k, const std::optional<std::string>& proof_header) {
    if (registry_.size() == 0) {
        // nothing to search; served free of charge
        return {200, nlohmann::json{{"results", nlohmann::json::array()}, {"empty_index", true}}};
    }

    auto run_search = [&]() {
        auto results = registry_.search(query, k == 0 ? config_.default_k : k, config_.weights,
                                        clock_.now_ms());
        nlohmann::json body{{"results", nlohmann::json::array()}};
        for (const auto& r : results) {
            body["results"].push_back(r.to_json());
        }
        return body;
    };

    if (config_.fees.f_search <= 0) {
        return {200, run_search()}; // ungated resource
    }

    std::string resource = "/v1/skills/search";
    if (!proof_header) {
        auto terms = gate_.challenge(resource, config_.fees.f_search);
        return {402, pay402::PaymentGate::terms_body(terms)};
    }

    auto proof = pay402::PaymentProof::from_header_value(*proof_header);
    if (!proof) {
        return {400, nlohmann::json{{"error", "bad-proof-encoding"}}};
    }
    pay402::Settlement settlement;
    try {
        auto terms = gate_.issued_terms(proof->terms_digest);
        if (!terms) {
            return {400, nlohmann::json{{"error", "bad-signature"},
                                        {"message", "unknown terms digest"}}};
        }
        settlement = gate_.verify_and_settle(*proof, *terms, "platform");
    } catch (const Error& err) {
        return payment_error(err);
    }

    std::string fee_ref =
        ledger_.append({clock_.now_ms(), econ::EntryKind::tier3, settlement.payer, "platform",
                        settlement.terms.amount, "search"});

    auto body = run_search();
    body["fee_ref"] = fee_ref;
    return {200, body};
}

RegistryService::Reply RegistryService::handle_install(
    const std::string& record_id, const std::optional<std::string>& proof_header) {
    auto record = registry_.find(record_id);
    if (!record) {
        return {404, nlohmann::json{{"error", "not-found"}}};
    }

    auto package_body = [&](const std::optional<std::string>& fee_ref) {
        distill::SkillPackage pkg;
        pkg.domain = record->domain;
        pkg.endpoints = record->endpoints;
        pkg.manifest_text = record->manifest_text;
        nlohmann::json body{{"package", pkg.to_publishable_json()},
                            {"record", record->to_json()}};
        if (fee_ref) body["fee_ref"] = *fee_ref;
        return body;
    };

    micro_t fee = econ::price_install(*record, recent_installs(record_id), config_.cost_model,
                                      config_.fees.f_install, clock_.now_ms());
    if (fee <= 0) {
        return {200, package_body(std::nullopt)}; // ungated resource
    }

    std::string resource = "/v1/skills/" + record_id + "/install";
    if (!proof_header) {
        auto terms = gate_.challenge(resource, fee);
        return {402, pay402::PaymentGate::terms_body(terms)};
    }

    auto proof = pay402::PaymentProof::from_header_value(*proof_header);
    if (!proof) {
        return {400, nlohmann::json{{"error", "bad-proof-encoding"}}};
    }
    pay402::Settlement settlement;
    try {
        auto terms = gate_.issued_terms(proof->terms_digest);
        if (!terms) {
            return {400, nlohmann::json{{"error", "bad-signature"},
                                        {"message", "unknown terms digest"}}};
        }
        settlement = gate_.verify_and_settle(*proof, *terms, "registry-escrow");
    } catch (const Error& err) {
        return payment_error(err);
    }

    auto charge = econ::charge_tier1(ledger_, *record, settlement.payer, settlement.terms.amount,
                                     config_.split, clock_.now_ms());
    return {200, package_body(charge.tier1_ref)};
}

RegistryService::Reply RegistryService::handle_publish(const nlohmann::json& package_json) {
    auto pkg = distill::SkillPackage::from_publishable_json(package_json);
    auto report = graph::validate_for_publish(pkg);
    if (!report.passed) {
        return {422, nlohmann::json{{"error", "validation-failed"},
                                    {"hard_failures", report.hard_failures}}};
    }
    auto outcome = registry_.publish(pkg, report, clock_.now_ms());
    return {200, nlohmann::json{{"record_id", outcome.record_id},
                                {"merged", outcome.merged},
                                {"delta_score", outcome.delta_score},
                                {"added_schema_lines", outcome.added_schema_lines},
                                {"caveats", report.caveats}}};
}

// --- LocalRegistryClient ------------------------------------------------------

LocalRegistryClient::LocalRegistryClient(RegistryService& service, pay402::Wallet wallet)
    : service_(service), wallet_(std::move(wallet)) {}

namespace {

void throw_payment_error(const nlohmann::json& body) {
    std::string code = body.value("error", "payment-refused");
    std::string message = body.value("message", "payment rejected");
    if (code == "replay") throw pay402::Replay(message);
    if (code == "expired") throw pay402::Expired(message);
    if (code == "amount-mismatch") throw pay402::AmountMismatch(message);
    if (code == "bad-signature") throw pay402::BadSignature(message);
    throw PaymentRefused(code + ": " + message);
}

} // namespace

namespace {

SearchResponse parse_search_body(const nlohmann::json& body) {
    SearchResponse out;
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
    if (body.contains("fee_ref")) {
        out.fee_ref = body["fee_ref"].get<std::string>();
    }
    return out;
}

} // namespace

SearchResponse LocalRegistryClient::search(const std::string& query, std::size_t k) {
    ++requests_;
    auto reply = service_.handle_search(query, k, std::nullopt);
    if (reply.status == 200) {
        return parse_search_body(reply.body); // ungated or empty index
    }
    if (reply.status != 402) {
        throw PaymentRefused("unexpected search reply status " + std::to_string(reply.status));
    }
    auto terms = pay402::PaymentTerms::from_json(reply.body["terms"]);
    auto proof = pay402::sign_proof(terms, wallet_);

    ++requests_;
    auto paid = service_.handle_search(query, k, proof.to_header_value());
    if (paid.status != 200) {
        throw_payment_error(paid.body);
    }
    return parse_search_body(paid.body);
}

namespace {

InstallResponse parse_install_body(const nlohmann::json& body) {
    InstallResponse out;
    out.package = distill::SkillPackage::from_publishable_json(body["package"]);
    out.record = graph::SkillRecord::from_json(body["record"]);
    if (body.contains("fee_ref")) {
        out.fee_ref = body["fee_ref"].get<std::string>();
    }
    return out;
}

} // namespace

InstallResponse LocalRegistryClient::install(const std::string& record_id) {
    ++requests_;
    auto reply = service_.handle_install(record_id, std::nullopt);
    if (reply.status == 404) {
        throw Unresolvable("record not found: " + record_id);
    }
    if (reply.status == 200) {
        return parse_install_body(reply.body); // ungated (zero-fee) resource
    }
    if (reply.status != 402) {
        throw PaymentRefused("unexpected install reply status " + std::to_string(reply.status));
    }
    auto terms = pay402::PaymentTerms::from_json(reply.body["terms"]);
    auto proof = pay402::sign_proof(terms, wallet_);

    ++requests_;
    auto paid = service_.handle_install(record_id, proof.to_header_value());
    if (paid.status != 200) {
        throw_payment_error(paid.body);
    }
    return parse_install_body(paid.body);
}

graph::PublishOutcome LocalRegistryClient::publish(const distill::SkillPackage& pkg) {
    ++requests_;
    auto reply = service_.handle_publish(pkg.to_publishable_json());
    if (reply.status != 200) {
        throw graph::ValidationFailed(
            reply.body.value("hard_failures", std::vector<std::string>{}),
            "publish rejected");
    }
    graph::PublishOutcome out;
    out.record_id = reply.body.value("record_id", "");
    out.merged = reply.body.value("merged", false);
    out.delta_score = reply.body.value("delta_score", 0.0);
    out.added_schema_lines = reply.body.value("added_schema_lines", 0);
    return out;
}

void LocalRegistryClient::report_execution(const std::string& record_id,
                                           const std::string& endpoint_key,
                                           trust::Outcome outcome, bool drift_critical) {
    auto& registry = service_.registry();
    time_ms now = service_.clock().now_ms();
    registry.record_endpoint_outcome(record_id, endpoint_key, outcome, now);
    if (drift_critical) {
        registry.set_verification_status(record_id, graph::VerificationStatus::drift_flagged,
                                         now);
    }
    registry.append_event({now, "execution", record_id, endpoint_key,
                           nlohmann::json{{"outcome", trust::outcome_name(outcome)},
                                          {"drift_critical", drift_critical}}});
}

// --- Orchestrator -------------------------------------------------------------

Orchestrator::Orchestrator(OrchestratorConfig config, RegistryClient& client, simnet::SimWeb& web,
                           distill::CredentialVault& vault, RouteCache& cache,
                           econ::Ledger& ledger)
    : config_(std::move(config)), client_(client), web_(web), vault_(vault), cache_(cache),
      ledger_(ledger) {}

namespace {

// The distinctive documentation of an endpoint: route tokens, parameter
// names and schema field names, deduplicated so repeated schema tokens do
// not dominate the norm. Boilerplate manifest prose would bias selection
// toward short sections.
std::string endpoint_doc_tokens(const distill::EndpointTemplate& e) {
    std::string text = e.method + " " + e.path_template;
    for (const auto& p : e.path_params) {
        text += " " + p.name;
    }
    for (const auto& [name, spec] : e.query_schema) {
        text += " " + name;
    }
    if (e.body_schema) {
        for (const auto& line : distill::flatten_shape(*e.body_schema)) {
            text += " " + line;
        }
    }
    for (const auto& line : distill::flatten_shape(e.response_schema)) {
        text += " " + line;
    }

    std::set<std::string> seen;
    std::string deduped;
    std::string token;
    auto flush = [&] {
        if (!token.empty() && seen.insert(token).second) {
            deduped += token + " ";
        }
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return deduped;
}

} // namespace

std::optional<std::string> Orchestrator::select_endpoint(const distill::SkillPackage& pkg,
                                                         const IntentQuery& q) {
    auto intent_embedding = graph::embed_text(q.text);

    const distill::EndpointTemplate* best = nullptr;
    double best_similarity = -2.0;
    for (const auto& e : pkg.endpoints) {
        bool satisfiable = true;
        for (const auto& p : e.path_params) {
            if (!q.params.count(p.name)) satisfiable = false;
        }
        for (const auto& [name, spec] : e.query_schema) {
            if (spec.required && !q.params.count(name)) satisfiable = false;
        }
        if (!satisfiable) continue;

        double similarity =
            graph::cosine(intent_embedding, graph::embed_text(endpoint_doc_tokens(e)));
        if (!best || similarity > best_similarity ||
            (similarity == best_similarity && e.key() < best->key())) {
            best_similarity = similarity;
            best = &e;
        }
    }
    if (!best) return std::nullopt;
    return best->key();
}

nlohmann::json Orchestrator::execute_skill(const distill::SkillPackage& pkg,
                                           const std::string& record_id,
                                           const std::string& endpoint_key,
                                           const std::map<std::string, std::string>& params) {
    const distill::EndpointTemplate* endpoint = nullptr;
    for (const auto& e : pkg.endpoints) {
        if (e.key() == endpoint_key) endpoint = &e;
    }
    if (!endpoint) {
        throw EndpointFailed("endpoint not in package: " + endpoint_key);
    }

    auto path = distill::fill_template(endpoint->path_template, endpoint->path_params, params);
    if (!path) {
        throw EndpointFailed("missing or invalid path parameters for " + endpoint_key);
    }

    std::string query;
    for (const auto& [name, spec] : endpoint->query_schema) {
        auto it = params.find(name);
        if (it == params.end()) {
            if (spec.required) {
                throw EndpointFailed("missing required query parameter " + name);
            }
            continue;
        }
        query += query.empty() ? "?" : "&";
        query += name + "=" + it->second;
    }

    auto auth_headers = [&]() {
        std::map<std::string, std::string> headers;
        if (endpoint->auth.kind == distill::AuthKind::none) return headers;
        auto secret = vault_.get(endpoint->auth.value_ref);
        if (!secret) {
            throw AuthMissing("vault has no entry for " + endpoint->auth.value_ref);
        }
        switch (endpoint->auth.kind) {
        case distill::AuthKind::bearer:
            headers["Authorization"] = "Bearer " + *secret;
            break;
        case distill::AuthKind::api_key_header:
            headers[endpoint->auth.location] = *secret;
            break;
        case distill::AuthKind::cookie:
            headers["Cookie"] = endpoint->auth.location + "=" + *secret;
            break;
        case distill::AuthKind::none:
            break;
        }
        return headers;
    };

    simnet::SimRequest request;
    request.method = endpoint->method;
    request.url = "https://" + pkg.domain + *path + query;
    request.headers = auth_headers();
    if (endpoint->body_schema && endpoint->method != "GET") {
        auto it = params.find("__body");
        request.body = it != params.end()
                           ? it->second
                           : canonical_dump(distill::render_example(*endpoint->body_schema));
        request.headers["Content-Type"] = "application/json";
    }

    simnet::SimResponse response;
    try {
        response = web_.serve(request);
        if (response.status == 401 || response.status == 403) {
            // one refresh-and-retry: re-read the vault and reissue
            request.headers = auth_headers();
            response = web_.serve(request);
        }
    } catch (const simnet::BotBlocked& e) {
        if (!record_id.empty()) {
            client_.report_execution(record_id, endpoint_key, trust::Outcome::failure, false);
        }
        throw EndpointFailed(std::string("blocked: ") + e.what());
    } catch (const simnet::NotFound& e) {
        if (!record_id.empty()) {
            client_.report_execution(record_id, endpoint_key, trust::Outcome::failure, false);
        }
        throw EndpointFailed(std::string("not found: ") + e.what());
    }

    if (response.status < 200 || response.status >= 300) {
        if (!record_id.empty()) {
            client_.report_execution(record_id, endpoint_key,
                                     response.status == 599 ? trust::Outcome::timeout
                                                            : trust::Outcome::failure,
                                     false);
        }
        throw EndpointFailed("endpoint returned status " + std::to_string(response.status));
    }

    auto data = nlohmann::json::parse(response.body, nullptr, false);
    if (data.is_discarded()) {
        if (!record_id.empty()) {
            client_.report_execution(record_id, endpoint_key, trust::Outcome::failure, false);
        }
        throw EndpointFailed("endpoint returned unparseable body");
    }

    auto drift = trust::detect_drift(endpoint->response_schema, distill::infer_shape(data));
    if (drift.critical) {
        if (!record_id.empty()) {
            client_.report_execution(record_id, endpoint_key, trust::Outcome::success, true);
        }
        throw SchemaMismatch(data, drift);
    }

    if (!record_id.empty()) {
        client_.report_execution(record_id, endpoint_key, trust::Outcome::success, false);
    }
    return data;
}

distill::SkillPackage Orchestrator::fallback_discover(const IntentQuery& /*q*/,
                                                      const std::string& domain) {
    auto archive = simnet::simulate_browse(web_, domain);
    auto kept = capture::filter_archive(archive, config_.filter_policy);
    if (kept.empty()) {
        throw DiscoveryEmpty("no API traffic found on " + domain);
    }
    auto packages = distill::distill(kept, vault_, config_.agent_id, web_.clock().now_ms());
    for (auto& pkg : packages) {
        if (pkg.domain == domain) {
            return pkg;
        }
    }
    throw DiscoveryEmpty("no package distilled for " + domain);
}

namespace {

std::string skill_dir_name(const std::string& record_id) {
    std::string name = record_id;
    std::replace(name.begin(), name.end(), ':', '_');
    std::replace(name.begin(), name.end(), '/', '_');
    return name;
}

} // namespace

void Orchestrator::store_skill(const std::string& record_id, const distill::SkillPackage& pkg) {
    installed_[record_id] = pkg;
    if (!config_.skill_store_dir.empty()) {
        distill::write_skill_dir(pkg,
                                 config_.skill_store_dir + "/" + skill_dir_name(record_id));
    }
}

const distill::SkillPackage* Orchestrator::installed_skill(const std::string& record_id) {
    auto it = installed_.find(record_id);
    if (it != installed_.end()) {
        return &it->second;
    }
    if (!config_.skill_store_dir.empty()) {
        std::string dir = config_.skill_store_dir + "/" + skill_dir_name(record_id);
        if (std::filesystem::exists(dir + "/endpoints.json")) {
            installed_[record_id] = distill::load_skill_dir(dir);
            return &installed_[record_id];
        }
    }
    return nullptr;
}

std::optional<std::string> Orchestrator::charge_tier2(const std::string& record_id) {
    auto it = known_records_.find(record_id);
    if (it == known_records_.end() || !it->second.tier2_opt_in || it->second.tier2_fee <= 0) {
        return std::nullopt;
    }
    return ledger_.append({web_.clock().now_ms(), econ::EntryKind::tier2, config_.agent_id,
                           "site:" + it->second.domain, it->second.tier2_fee, record_id});
}

ExecutionResult Orchestrator::finish(const std::string& source, nlohmann::json data,
                                     time_ms started, std::vector<std::string> fees,
                                     const IntentQuery& q, const std::string& skill_id,
                                     const std::string& endpoint_key) {
    RouteCacheEntry entry;
    entry.intent_key = intent_key(q);
    entry.skill_id = skill_id;
    entry.endpoint_key = endpoint_key;
    entry.resolved_at = web_.clock().now_ms();
    entry.ttl = config_.cache_ttl;
    cache_.put(std::move(entry));

    ExecutionResult result;
    result.data = std::move(data);
    result.total_ms = web_.clock().now_ms() - started;
    result.source = source;
    result.fees_paid = std::move(fees);
    return result;
}

ExecutionResult Orchestrator::resolve_intent(const IntentQuery& q) {
    if (q.text.empty()) {
        throw Unresolvable("intent text is empty");
    }
    const time_ms started = web_.clock().now_ms();
    const std::string key = intent_key(q);
    std::vector<std::string> fees;

    // Path 1: route cache
    if (auto entry = cache_.get(key, started)) {
        const distill::SkillPackage* pkg = installed_skill(entry->skill_id);
        if (pkg) {
            try {
                auto data = execute_skill(*pkg, entry->skill_id, entry->endpoint_key, q.params);
                auto tier2 = charge_tier2(entry->skill_id);
                ExecutionResult result;
                result.data = std::move(data);
                result.total_ms = web_.clock().now_ms() - started;
                result.source = "cache";
                if (tier2) result.fees_paid.push_back(*tier2);
                return result;
            } catch (const Error&) {
                cache_.erase(key); // stale binding; fall through the chain
            }
        } else {
            cache_.erase(key);
        }
    }

    // Rational-adoption gate before any paid graph interaction
    bool graph_allowed =
        econ::adoption_decision(config_.fees, 1, config_.cost_model) ==
        econ::AdoptionDecision::use_graph;

    std::optional<std::string> fallback_domain = q.domain_hint;

    // Path 2: paid graph lookup
    if (graph_allowed) {
        SearchResponse found = client_.search(q.text, config_.search_k);
        if (found.fee_ref) {
            fees.push_back(*found.fee_ref);
            tier3_spend_ += config_.fees.f_search;
        }

        const graph::ScoredResult* best = nullptr;
        for (const auto& r : found.results) {
            if (q.domain_hint && r.domain != *q.domain_hint) continue;
            if (r.composite >= config_.acceptance_threshold) {
                best = &r;
                break; // results are rank-ordered
            }
        }
        if (!fallback_domain && !found.results.empty()) {
            fallback_domain = found.results.front().domain;
        }

        if (best) {
            try {
                auto install = client_.install(best->id);
                if (install.fee_ref) {
                    fees.push_back(*install.fee_ref);
                }
                store_skill(best->id, install.package);
                known_records_[best->id] = install.record;

                auto endpoint_key = select_endpoint(install.package, q);
                if (endpoint_key) {
                    auto data =
                        execute_skill(install.package, best->id, *endpoint_key, q.params);
                    auto tier2 = charge_tier2(best->id);
                    if (tier2) fees.push_back(*tier2);
                    return finish("graph", std::move(data), started, std::move(fees), q,
                                  best->id, *endpoint_key);
                }
            } catch (const SchemaMismatch&) {
                // drift reported by execute_skill; rediscover below
            } catch (const EndpointFailed&) {
            } catch (const AuthMissing&) {
            }
            if (!fallback_domain) fallback_domain = best->domain;
        }
    }

    // Path 3: discovery fallback with publish-back
    if (!fallback_domain) {
        throw Unresolvable("no cache entry, no graph match and no domain hint to discover");
    }

    auto pkg = fallback_discover(q, *fallback_domain);
    auto outcome = client_.publish(pkg);
    store_skill(outcome.record_id, pkg);

    auto endpoint_key = select_endpoint(pkg, q);
    if (!endpoint_key) {
        throw Unresolvable("discovered package has no endpoint matching the intent");
    }
    auto data = execute_skill(pkg, outcome.record_id, *endpoint_key, q.params);
    return finish("discovery", std::move(data), started, std::move(fees), q, outcome.record_id,
                  *endpoint_key);
}

} // namespace routegraph::orch
