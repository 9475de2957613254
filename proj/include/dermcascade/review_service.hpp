#ifndef DERMCASCADE_REVIEW_SERVICE_HPP
#define DERMCASCADE_REVIEW_SERVICE_HPP

// Two-reviewer anonymization review over HTTP. JSON endpoints under /api/v1/
// (see docs/review_api.md):
//   GET  /api/v1/reviewers/{id}/next       next unjudged record, or {"done": true}
//   GET  /api/v1/reviewers/{id}/progress   judged / pending / assigned
//   POST /api/v1/verdicts                  submit; 409 on a second submission
//                                          unless "supersede": true
//   GET  /api/v1/agreement                 incomplete status or the report
//   GET  /api/v1/disagreements             shared ids the reviewers split on
//   GET  /api/v1/session                   roster and partition sizes
// ReviewService::handle() holds all behavior; serve_review() only binds it
// to a socket.

#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/review.hpp"

#include <httplib.h>
#include <json.hpp>

#include <ctime>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dermcascade {

struct ApiResponse {
    int status = 200;
    nlohmann::ordered_json body;
};

class ReviewService {
public:
    /// `sample` texts are what reviewers see (already masked). `originals`, when
    /// given and `show_originals` is set, adds the unmasked text to /next.
    ReviewService(ReviewPartition partition, std::shared_ptr<VerdictStore> store,
                  std::pair<std::string, std::string> roster, std::optional<LabeledCorpus> originals = std::nullopt,
                  bool show_originals = false)
        : partition_(std::move(partition)), store_(std::move(store)), roster_(std::move(roster)),
          show_originals_(show_originals) {
        if (!store_) throw Error("review session needs a verdict store");
        if (roster_.first.empty() || roster_.second.empty() || roster_.first == roster_.second)
            throw Error("review session needs exactly two distinct reviewer ids");
        for (const auto& r : partition_.sample.records()) by_id_[r.id] = &r;
        if (originals)
            for (const auto& r : originals->records()) originals_[r.id] = r.text;
    }

    ReviewService(const ReviewService&) = delete;
    ReviewService& operator=(const ReviewService&) = delete;

    const std::pair<std::string, std::string>& roster() const noexcept { return roster_; }
    const ReviewPartition& partition() const noexcept { return partition_; }

    bool is_reviewer(const std::string& id) const { return id == roster_.first || id == roster_.second; }

    const std::set<std::string>& assigned(const std::string& reviewer) const {
        if (reviewer == roster_.first) return partition_.subset_a;
        if (reviewer == roster_.second) return partition_.subset_b;
        throw Error("unknown reviewer '" + reviewer + "'");
    }

    struct Progress {
        std::size_t judged = 0, pending = 0, assigned = 0;
    };

    Progress progress(const std::string& reviewer) const {
        Progress p;
        for (const auto& id : assigned(reviewer)) {
            ++p.assigned;
            if (store_->find(id, reviewer)) ++p.judged;
            else ++p.pending;
        }
        return p;
    }

    /// Next unjudged assigned record in sample order.
    std::optional<std::string> next(const std::string& reviewer) const {
        const auto& mine = assigned(reviewer);
        for (const auto& r : partition_.sample.records())
            if (mine.count(r.id) && !store_->find(r.id, reviewer)) return r.id;
        return std::nullopt;
    }

    bool shared_complete() const {
        for (const auto& id : partition_.shared_ids)
            if (!store_->find(id, roster_.first) || !store_->find(id, roster_.second)) return false;
        return true;
    }

    AgreementReport agreement() const { return compute_agreement(store_->current(), partition_, roster_); }

    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) {
        try {
            return route(method, path, body);
        } catch (const nlohmann::json::exception& e) {
            return error(400, std::string("malformed request: ") + e.what());
        } catch (const Error& e) {
            return error(400, e.what());
        }
    }

private:
    static ApiResponse error(int status, const std::string& message) {
        return {status, {{"error", message}}};
    }

    static std::string now_utc() {
        const std::time_t t = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    nlohmann::ordered_json progress_json(const std::string& reviewer) const {
        const auto p = progress(reviewer);
        return {{"reviewer_id", reviewer}, {"judged", p.judged}, {"pending", p.pending}, {"assigned", p.assigned}};
    }

    ApiResponse route(const std::string& method, const std::string& path, const std::string& body) {
        static const std::string kPrefix = "/api/v1/";
        if (path.rfind(kPrefix, 0) != 0) return error(404, "no such endpoint");
        const auto parts = text::split(path.substr(kPrefix.size()), '/');

        if (parts.size() == 3 && parts[0] == "reviewers" && method == "GET") {
            const auto& reviewer = parts[1];
            if (!is_reviewer(reviewer)) return error(404, "unknown reviewer '" + reviewer + "'");
            if (parts[2] == "progress") return {200, progress_json(reviewer)};
            if (parts[2] == "next") {
                auto id = next(reviewer);
                nlohmann::ordered_json j;
                j["progress"] = progress_json(reviewer);
                if (!id) {
                    j["done"] = true;
                    return {200, j};
                }
                const auto* rec = by_id_.at(*id);
                j["done"] = false;
                j["record_id"] = rec->id;
                j["masked_text"] = rec->text;
                j["label"] = rec->label;
                j["shared"] = partition_.shared_ids.count(rec->id) > 0;
                if (show_originals_)
                    if (auto it = originals_.find(rec->id); it != originals_.end()) j["original_text"] = it->second;
                return {200, j};
            }
        }
        if (parts.size() == 1 && parts[0] == "verdicts" && method == "POST") return post_verdict(body);
        if (parts.size() == 1 && parts[0] == "agreement" && method == "GET") return get_agreement();
        if (parts.size() == 1 && parts[0] == "disagreements" && method == "GET") return get_disagreements();
        if (parts.size() == 1 && parts[0] == "session" && method == "GET") {
            return {200,
                    {{"reviewers", nlohmann::ordered_json::array({roster_.first, roster_.second})},
                     {"sample", partition_.sample.size()},
                     {"shared", partition_.shared_ids.size()},
                     {"assigned", {{roster_.first, partition_.subset_a.size()}, {roster_.second, partition_.subset_b.size()}}}}};
        }
        return error(404, "no such endpoint");
    }

    ApiResponse post_verdict(const std::string& body) {
        const auto j = nlohmann::json::parse(body);
        Verdict v;
        v.record_id = j.at("record_id").get<std::string>();
        v.reviewer_id = j.at("reviewer_id").get<std::string>();
        v.judgment = parse_judgment(j.at("judgment").get<std::string>());
        if (j.contains("note") && !j["note"].is_null()) v.note = j["note"].get<std::string>();
        v.timestamp = j.value("timestamp", now_utc());
        const bool supersede = j.value("supersede", false);

        if (!is_reviewer(v.reviewer_id)) return error(404, "unknown reviewer '" + v.reviewer_id + "'");
        if (!assigned(v.reviewer_id).count(v.record_id))
            return error(403, "record '" + v.record_id + "' is not assigned to '" + v.reviewer_id + "'");
        if (store_->submit(v, supersede) == VerdictStore::Outcome::conflict) {
            nlohmann::ordered_json e;
            e["error"] = supersede ? "nothing to supersede" : "verdict already submitted; resubmit with supersede";
            if (auto existing = store_->find(v.record_id, v.reviewer_id)) e["existing"] = verdict_to_json(*existing);
            return {409, e};
        }
        nlohmann::ordered_json out;
        out["stored"] = verdict_to_json(v);
        out["progress"] = progress_json(v.reviewer_id);
        return {201, out};
    }

    ApiResponse get_agreement() const {
        nlohmann::ordered_json j;
        if (!shared_complete()) {
            std::size_t both = 0;
            for (const auto& id : partition_.shared_ids)
                if (store_->find(id, roster_.first) && store_->find(id, roster_.second)) ++both;
            j["status"] = "incomplete";
            j["shared"] = partition_.shared_ids.size();
            j["judged_by_both"] = both;
            j["progress"] = {progress_json(roster_.first), progress_json(roster_.second)};
            return {200, j};
        }
        const auto report = agreement();
        j["status"] = "complete";
        j["shared"] = report.shared;
        j["agreements"] = report.shared - report.disagreements.size();
        j["raw_agreement"] = report.raw_agreement;
        j["kappa"] = report.kappa;
        j["disagreements"] = report.disagreements;
        return {200, j};
    }

    ApiResponse get_disagreements() const {
        nlohmann::ordered_json items = nlohmann::ordered_json::array();
        for (const auto& id : partition_.shared_ids) {
            auto a = store_->find(id, roster_.first);
            auto b = store_->find(id, roster_.second);
            if (!a || !b || a->judgment == b->judgment) continue;
            const auto* rec = by_id_.at(id);
            items.push_back({{"record_id", id},
                             {"label", rec->label},
                             {"masked_text", rec->text},
                             {"verdicts", {verdict_to_json(*a), verdict_to_json(*b)}}});
        }
        return {200, {{"complete", shared_complete()}, {"disagreements", items}}};
    }

    ReviewPartition partition_;
    std::shared_ptr<VerdictStore> store_;
    std::pair<std::string, std::string> roster_;
    bool show_originals_;
    std::map<std::string, const ClinicalRecord*> by_id_;
    std::map<std::string, std::string> originals_;
};

/// Wires every /api/v1/ route of `service` into `server`. Optionally serves a
/// static UI bundle from `static_dir`.
inline void mount_review_api(httplib::Server& server, ReviewService& service, const std::string& static_dir = {}) {
    auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.Get(R"(/api/v1/.*)", forward);
    server.Post(R"(/api/v1/.*)", forward);
    if (!static_dir.empty()) server.set_mount_point("/", static_dir);
}

/// Blocks until the server stops. Port 0 picks a free port; `on_ready`
/// receives the bound port.
inline void serve_review(ReviewService& service, const std::string& host, int port,
                         const std::function<void(int)>& on_ready = {}, const std::string& static_dir = {}) {
    httplib::Server server;
    mount_review_api(server, service, static_dir);
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    if (on_ready) on_ready(bound);
    server.listen_after_bind();
}

} // namespace dermcascade

#endif
