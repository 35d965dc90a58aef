#include "courtguard/service.hpp"

#include <algorithm>
#include <semaphore>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace courtguard {

nlohmann::json ScreenDecision::to_json() const {
    nlohmann::json j{{"classification", to_string(classification)},
                     {"confidence", to_string(confidence)},
                     {"failed", failed},
                     {"policy_applied", policy_applied},
                     {"latency_s", latency_s}};
    if (failure) j["failure"] = *failure;
    return j;
}

ScreenDecision decide(const DetectorResult& result, FailurePolicy policy) {
    ScreenDecision d;
    if (result.ok()) {
        d.classification = verdict_to_binary(result->verdict);
        d.confidence = result->verdict.confidence;
        d.latency_s = result->total_latency_s;
        return d;
    }
    const auto& f = result.error();
    d.failed = true;
    d.policy_applied = true;
    d.classification =
        policy == FailurePolicy::fail_closed ? Classification::injection : Classification::benign;
    d.latency_s = f.total_latency_s;
    d.failure = std::string(to_string(f.kind)) + ": " + f.message;
    d.backend_unreachable = f.kind == FailureKind::backend && f.backend_error &&
                            (f.backend_error->kind == BackendErrorKind::transport ||
                             f.backend_error->kind == BackendErrorKind::timeout);
    return d;
}

namespace {

struct SlotGuard {
    explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
    std::counting_semaphore<>& sem;
};

}  // namespace

struct ScreeningService::Impl {
    Impl(std::shared_ptr<const Detector> d, FailurePolicy p, std::size_t limit)
        : detector(std::move(d)), policy(p), slots(static_cast<std::ptrdiff_t>(limit)) {}

    std::shared_ptr<const Detector> detector;
    FailurePolicy policy;
    mutable std::counting_semaphore<> slots;
    httplib::Server server;
};

ScreeningService::ScreeningService(std::shared_ptr<const Detector> detector, FailurePolicy policy,
                                   std::size_t concurrency) {
    if (!detector) throw std::invalid_argument("ScreeningService needs a detector");
    if (concurrency == 0) throw std::invalid_argument("concurrency must be >= 1");
    impl_ = std::make_unique<Impl>(std::move(detector), policy, concurrency);

    // Enough workers that queued requests wait on the semaphore, not on accept.
    const std::size_t workers = std::max<std::size_t>(8, concurrency * 4);
    impl_->server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };

    impl_->server.Post("/v1/screen", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        const auto reject = [&](std::string msg) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", std::move(msg)}}.dump(), "application/json");
        };
        if (body.is_discarded() || !body.is_object()) return reject("body must be a JSON object");
        const auto it = body.find("prompt");
        if (it == body.end() || !it->is_string()) return reject("missing string field 'prompt'");
        const auto prompt = it->get<std::string>();
        if (!has_content(prompt)) return reject("prompt is empty");
        const auto decision = screen(prompt);
        // fail_closed always answers 200 with a block; fail_open reports an
        // unreachable backend as 503, still carrying the allow decision.
        if (decision.backend_unreachable && impl_->policy == FailurePolicy::fail_open) res.status = 503;
        res.set_content(decision.to_json().dump(), "application/json");
    });

    impl_->server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
        const auto h = health();
        res.status = h.value("backend", "") == "ok" ? 200 : 503;
        res.set_content(h.dump(), "application/json");
    });
}

ScreeningService::~ScreeningService() { stop(); }

ScreenDecision ScreeningService::screen(const std::string& prompt) const {
    DetectorResult result = [&] {
        SlotGuard slot(impl_->slots);
        return impl_->detector->classify(prompt);
    }();

    auto decision = decide(result, impl_->policy);
    if (decision.policy_applied) {
        spdlog::warn("classification failed ({}); {} policy answered {}", *decision.failure,
                     to_string(impl_->policy), to_string(decision.classification));
    }
    return decision;
}

nlohmann::json ScreeningService::health() const {
    const auto& d = *impl_->detector;
    nlohmann::json j{{"system", to_string(d.system())},
                     {"model", d.model_name()},
                     {"template_set_id", d.template_set_id()},
                     {"policy", to_string(impl_->policy)}};
    try {
        d.templates().validate();
        j["templates"] = "ok";
    } catch (const TemplateError& e) {
        j["templates"] = e.what();
    }
    ChatRequest ping;
    ping.user = "ping";
    ping.params.max_output_tokens = 1;
    const auto res = d.backend().complete(ping);
    j["backend"] = res.ok() ? std::string("ok") : res.error().describe();
    return j;
}

int ScreeningService::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ScreeningService::listen() { return impl_->server.listen_after_bind(); }

void ScreeningService::stop() {
    if (impl_) impl_->server.stop();
}

void ScreeningService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace courtguard
