#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "routegraph/orchestrator.hpp"

namespace httplib {
class Server;
class Client;
} // namespace httplib

namespace routegraph::orch {

// Registry HTTP surface:
//   GET  /v1/skills/search?q=&k=   (402-gated)
//   GET  /v1/skills/{id}/install   (402-gated)
//   POST /v1/skills                (publish)
// Local orchestrator surface, when an orchestrator is attached:
//   POST /v1/intent/resolve
class HttpApiServer {
public:
    explicit HttpApiServer(RegistryService& service, Orchestrator* orchestrator = nullptr);
    ~HttpApiServer();

    // Binds to an ephemeral port on localhost and serves on a background
    // thread; returns the port.
    int start();
    void stop();
    int port() const { return port_; }

private:
    RegistryService& service_;
    Orchestrator* orchestrator_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

// Registry client over HTTP, including the 402 sign-and-retry handshake.
class HttpRegistryClient final : public RegistryClient {
public:
    HttpRegistryClient(std::string host, int port, pay402::Wallet wallet);
    ~HttpRegistryClient() override;

    SearchResponse search(const std::string& query, std::size_t k) override;
    InstallResponse install(const std::string& record_id) override;
    graph::PublishOutcome publish(const distill::SkillPackage& pkg) override;
    void report_execution(const std::string&, const std::string&, trust::Outcome,
                          bool) override {} // execution telemetry stays local in HTTP mode
    std::int64_t request_count() const override { return requests_; }

private:
    std::unique_ptr<httplib::Client> http_;
    pay402::Wallet wallet_;
    std::int64_t requests_ = 0;
};

} // namespace routegraph::orch
