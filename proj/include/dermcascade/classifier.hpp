#ifndef DERMCASCADE_CLASSIFIER_HPP
#define DERMCASCADE_CLASSIFIER_HPP

// Classifier contract shared by cascade stages and the final disease model:
//   fit(texts, labels) -> classifier
//   classifier.predict_topk(text, k) -> ranked (label, score)
// Implementations: the TF-IDF + softmax learner, a constant predictor for
// degenerate stages, and a client for an external inference process.

#include "dermcascade/error.hpp"
#include "dermcascade/featurizer.hpp"
#include "dermcascade/linear_model.hpp"

#include <json.hpp>

#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <spawn.h>
#include <string>
#include <string_view>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

extern char** environ;

namespace dermcascade {

struct ScoredLabel {
    std::string label;
    double score;

    friend bool operator==(const ScoredLabel&, const ScoredLabel&) = default;
};

class TextClassifier {
public:
    virtual ~TextClassifier() = default;

    virtual const std::vector<std::string>& class_names() const = 0;

    /// At most k labels, best first.
    virtual std::vector<ScoredLabel> predict_topk(std::string_view text, std::size_t k) const = 0;

    /// Serialized form; must carry a "kind" field understood by classifier_from_json().
    virtual nlohmann::ordered_json to_json() const = 0;

    virtual std::string kind() const = 0;
};

class ClassifierTrainer {
public:
    virtual ~ClassifierTrainer() = default;
    virtual std::unique_ptr<TextClassifier> fit(const std::vector<std::string>& texts,
                                                const std::vector<std::string>& labels) const = 0;
};

// --- linear ----------------------------------------------------------------

class LinearTextClassifier : public TextClassifier {
public:
    LinearTextClassifier(TfidfFeaturizer featurizer, LinearModel model)
        : featurizer_(std::move(featurizer)), model_(std::move(model)) {}

    const std::vector<std::string>& class_names() const override { return model_.class_names; }

    std::vector<ScoredLabel> predict_topk(std::string_view text, std::size_t k) const override {
        std::vector<ScoredLabel> out;
        for (const auto& s : predict_proba_topk(model_, featurizer_.transform(text), k))
            out.push_back({model_.class_names[s.index], s.probability});
        return out;
    }

    nlohmann::ordered_json to_json() const override {
        nlohmann::ordered_json j;
        j["kind"] = kind();
        j["featurizer"] = featurizer_.to_json();
        j["model"] = dermcascade::to_json(model_);
        return j;
    }

    std::string kind() const override { return "linear"; }

    const TfidfFeaturizer& featurizer() const noexcept { return featurizer_; }
    const LinearModel& model() const noexcept { return model_; }

private:
    TfidfFeaturizer featurizer_;
    LinearModel model_;
};

class LinearTrainer : public ClassifierTrainer {
public:
    explicit LinearTrainer(TrainConfig config = {}, FeaturizerConfig featurizer = {})
        : config_(config), featurizer_config_(featurizer) {}

    /// Class indices follow lexicographic label order.
    std::unique_ptr<TextClassifier> fit(const std::vector<std::string>& texts,
                                        const std::vector<std::string>& labels) const override {
        if (texts.size() != labels.size()) throw Error("texts and labels differ in length");
        const std::set<std::string> distinct(labels.begin(), labels.end());
        std::vector<std::string> names(distinct.begin(), distinct.end());
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
        std::vector<std::size_t> y;
        y.reserve(labels.size());
        for (const auto& l : labels) y.push_back(index.at(l));

        TfidfFeaturizer featurizer(featurizer_config_);
        featurizer.fit(texts);
        auto rows = featurizer.transform_all(texts);
        auto fit = fit_linear_softmax(rows, y, std::move(names), featurizer.size(), config_);
        last_loss_history_ = fit.loss_history;
        return std::make_unique<LinearTextClassifier>(std::move(featurizer), std::move(fit.model));
    }

    const TrainConfig& config() const noexcept { return config_; }

    /// Loss history of the most recent fit() on this trainer.
    const std::vector<double>& last_loss_history() const noexcept { return last_loss_history_; }

private:
    TrainConfig config_;
    FeaturizerConfig featurizer_config_;
    mutable std::vector<double> last_loss_history_;
};

// --- constant ----------------------------------------------------------------

/// Always predicts one label with score 1. Stands in for a stage whose
/// training data has a single relation value.
class ConstantClassifier : public TextClassifier {
public:
    explicit ConstantClassifier(std::string label) : names_{std::move(label)} {}

    const std::vector<std::string>& class_names() const override { return names_; }

    std::vector<ScoredLabel> predict_topk(std::string_view, std::size_t k) const override {
        if (k < 1) throw Error("k must be >= 1");
        return {{names_.front(), 1.0}};
    }

    nlohmann::ordered_json to_json() const override {
        nlohmann::ordered_json j;
        j["kind"] = kind();
        j["label"] = names_.front();
        return j;
    }

    std::string kind() const override { return "constant"; }

private:
    std::vector<std::string> names_;
};

// --- external ----------------------------------------------------------------

/// Client for an inference process speaking newline-delimited JSON over its
/// stdin/stdout (see docs/external_classifier_protocol.md):
///   request:  {"text": "<report>", "k": <int>}
///   response: {"ranked": [["<label>", <score>], ...]}
/// Requests are serialized; the process is started lazily and kept alive.
class ExternalClassifier : public TextClassifier {
public:
    ExternalClassifier(std::vector<std::string> command, std::vector<std::string> class_names = {})
        : command_(std::move(command)), names_(std::move(class_names)),
          process_(std::make_shared<Process>()) {
        if (command_.empty()) throw Error("external classifier needs a command");
    }

    const std::vector<std::string>& class_names() const override { return names_; }

    std::vector<ScoredLabel> predict_topk(std::string_view text, std::size_t k) const override {
        if (k < 1) throw Error("k must be >= 1");
        std::lock_guard lock(process_->mutex);
        process_->ensure_started(command_);
        nlohmann::json req;
        req["text"] = std::string(text);
        req["k"] = k;
        process_->write_line(req.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
        const std::string line = process_->read_line();
        nlohmann::json resp;
        try {
            resp = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(std::string("external classifier sent invalid JSON: ") + e.what());
        }
        if (!resp.is_object() || !resp.contains("ranked") || !resp["ranked"].is_array())
            throw Error("external classifier response lacks a 'ranked' array");
        std::vector<ScoredLabel> out;
        for (const auto& item : resp["ranked"]) {
            if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_number())
                throw Error("external classifier 'ranked' entries must be [label, score]");
            out.push_back({item[0].get<std::string>(), item[1].get<double>()});
            if (out.size() == k) break;
        }
        return out;
    }

    nlohmann::ordered_json to_json() const override {
        nlohmann::ordered_json j;
        j["kind"] = kind();
        j["command"] = command_;
        j["class_names"] = names_;
        return j;
    }

    std::string kind() const override { return "external"; }

private:
    struct Process {
        pid_t pid = -1;
        int to_child = -1;
        int from_child = -1;
        std::string buffer;
        std::mutex mutex;

        ~Process() {
            if (to_child >= 0) ::close(to_child);
            if (from_child >= 0) ::close(from_child);
            if (pid > 0) {
                int status = 0;
                ::waitpid(pid, &status, 0);
            }
        }

        void ensure_started(const std::vector<std::string>& cmd) {
            if (pid > 0) return;
            int in_pipe[2], out_pipe[2];
            if (::pipe(in_pipe) != 0) throw Error("pipe() failed");
            if (::pipe(out_pipe) != 0) {
                ::close(in_pipe[0]);
                ::close(in_pipe[1]);
                throw Error("pipe() failed");
            }
            posix_spawn_file_actions_t actions;
            posix_spawn_file_actions_init(&actions);
            posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
            posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
            posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
            posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
            std::vector<char*> argv;
            for (const auto& a : cmd) argv.push_back(const_cast<char*>(a.c_str()));
            argv.push_back(nullptr);
            const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
            posix_spawn_file_actions_destroy(&actions);
            ::close(in_pipe[0]);
            ::close(out_pipe[1]);
            if (rc != 0) {
                ::close(in_pipe[1]);
                ::close(out_pipe[0]);
                pid = -1;
                throw Error("cannot start external classifier '" + cmd.front() + "': " + std::strerror(rc));
            }
            to_child = in_pipe[1];
            from_child = out_pipe[0];
            std::signal(SIGPIPE, SIG_IGN);
        }

        void write_line(const std::string& line) {
            std::string data = line + '\n';
            std::size_t off = 0;
            while (off < data.size()) {
                const auto n = ::write(to_child, data.data() + off, data.size() - off);
                if (n < 0) {
                    if (errno == EINTR) continue;
                    throw Error("external classifier closed its input");
                }
                off += static_cast<std::size_t>(n);
            }
        }

        std::string read_line() {
            for (;;) {
                if (auto nl = buffer.find('\n'); nl != std::string::npos) {
                    std::string line = buffer.substr(0, nl);
                    buffer.erase(0, nl + 1);
                    return line;
                }
                char chunk[4096];
                const auto n = ::read(from_child, chunk, sizeof chunk);
                if (n < 0 && errno == EINTR) continue;
                if (n <= 0) throw Error("external classifier exited before answering");
                buffer.append(chunk, static_cast<std::size_t>(n));
            }
        }
    };

    std::vector<std::string> command_;
    std::vector<std::string> names_;
    std::shared_ptr<Process> process_;
};

/// "Training" for an external backend binds the command; the model behind it
/// is trained out of band.
class ExternalTrainer : public ClassifierTrainer {
public:
    explicit ExternalTrainer(std::vector<std::string> command) : command_(std::move(command)) {}

    std::unique_ptr<TextClassifier> fit(const std::vector<std::string>&,
                                        const std::vector<std::string>& labels) const override {
        const std::set<std::string> distinct(labels.begin(), labels.end());
        return std::make_unique<ExternalClassifier>(command_, std::vector<std::string>(distinct.begin(), distinct.end()));
    }

private:
    std::vector<std::string> command_;
};

inline std::unique_ptr<TextClassifier> classifier_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear")
        return std::make_unique<LinearTextClassifier>(TfidfFeaturizer::from_json(j.at("featurizer")),
                                                      linear_model_from_json(j.at("model")));
    if (kind == "constant") return std::make_unique<ConstantClassifier>(j.at("label").get<std::string>());
    if (kind == "external")
        return std::make_unique<ExternalClassifier>(j.at("command").get<std::vector<std::string>>(),
                                                    j.value("class_names", std::vector<std::string>{}));
    throw Error("unknown classifier kind '" + kind + "'");
}

} // namespace dermcascade

#endif
