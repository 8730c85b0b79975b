#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hilayout/hierarchy_io.hpp"
#include "hilayout/scene_model.hpp"

namespace hilayout::llm {

struct PromptConfig {
    /// Allowed object categories; empty means open vocabulary.
    std::vector<std::string> categories;

    /// The categories of the synthetic corpus.
    static PromptConfig closed_vocabulary();
    static PromptConfig open_vocabulary() { return {}; }
};

struct PromptSpec {
    std::string role_task;
    std::string format_constraints;
    std::string example_and_request;
    std::optional<std::vector<std::string>> category_constraint;

    /// The full prompt: the three parts separated by blank lines.
    std::string text() const;
};

/// Throws std::invalid_argument on an empty requirement or non-positive size.
PromptSpec build_prompt(const std::string& requirement, Vec2 room_size, const PromptConfig& cfg = PromptConfig::closed_vocabulary());

/// Prompt for a language-guided edit: the current scene (without poses) and
/// the instruction, asking for the complete updated document.
PromptSpec build_edit_prompt(const SceneHierarchy& current, const std::string& instruction,
                             const PromptConfig& cfg = PromptConfig::closed_vocabulary());

/// Hierarchy as handed to the model: poses, assets and placements removed.
SceneHierarchy strip_layout(const SceneHierarchy& h);

/// Text in, text out. Implementations are safe to call concurrently.
class Provider {
public:
    virtual ~Provider() = default;
    /// Throws ProviderError on transport failure, FixtureMissing when an
    /// offline provider has no answer.
    virtual std::string complete(const std::string& prompt) const = 0;
    virtual std::string name() const = 0;
};

/// Answers from a fixture directory holding index.json:
///   {"requests": [{"keywords": [...], "file": "..."}],
///    "edits": [{"instruction": "...", "file": "..."}]}
/// A request entry matches when every keyword is a token of the prompt's
/// requirement line; an edit entry matches the instruction line exactly,
/// ignoring case and surrounding space. First match wins.
class FixtureProvider : public Provider {
public:
    /// Throws FixtureMissing when the directory or its index is absent.
    explicit FixtureProvider(const std::string& dir);
    std::string complete(const std::string& prompt) const override;
    std::string name() const override { return "fixture"; }

private:
    struct Entry {
        std::vector<std::string> keywords;
        std::string instruction;
        std::string file;
    };
    std::string dir_;
    std::vector<Entry> requests_, edits_;
};

/// Transcript store keyed by a hash of the exact prompt text.
std::string transcript_key(const std::string& prompt);
std::string transcript_path(const std::string& dir, const std::string& prompt);

/// Returns recorded responses byte-exactly. Throws FixtureMissing for an
/// unrecorded prompt.
class ReplayProvider : public Provider {
public:
    explicit ReplayProvider(std::string dir);
    std::string complete(const std::string& prompt) const override;
    std::string name() const override { return "replay"; }

private:
    std::string dir_;
};

struct RemoteConfig {
    std::string endpoint;  ///< chat-completions URL; empty reads HILAYOUT_LLM_ENDPOINT
    std::string model;     ///< empty reads HILAYOUT_LLM_MODEL
    std::string api_key_env = "HILAYOUT_LLM_API_KEY";
    double temperature = 0.7;
    int connect_timeout_s = 10;
    int read_timeout_s = 120;
};

/// OpenAI-style chat-completions endpoint over HTTP(S).
class RemoteProvider : public Provider {
public:
    explicit RemoteProvider(RemoteConfig cfg);
    std::string complete(const std::string& prompt) const override;
    std::string name() const override { return "remote"; }

private:
    RemoteConfig cfg_;
};

/// Forwards to another provider and writes each exchange as a transcript.
class RecordingProvider : public Provider {
public:
    RecordingProvider(std::shared_ptr<const Provider> inner, std::string dir);
    std::string complete(const std::string& prompt) const override;
    std::string name() const override { return inner_->name(); }

private:
    std::shared_ptr<const Provider> inner_;
    std::string dir_;
    mutable std::mutex mu_;
};

enum class ProviderKind { Remote, Fixture, Replay };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Fixture;
    std::string fixtures_dir;
    std::string transcripts_dir;  ///< replay source
    std::string record_dir;       ///< when set, every exchange is recorded here
    RemoteConfig remote;
    int max_attempts = 3;

    /// "fixture", "replay" or "remote"; throws std::invalid_argument.
    static ProviderKind parse_kind(const std::string& s);
};

std::shared_ptr<const Provider> make_provider(const ProviderConfig& cfg);

struct Attempt {
    std::string prompt;
    std::string response;
    io::ValidationReport report;
};

struct Generation {
    io::RawDocument document;
    SceneHierarchy hierarchy;
    io::ValidationReport report;
    std::vector<Attempt> attempts;
};

/// Ask the provider, parse, and on failure re-ask with the validation errors
/// appended to the unchanged base prompt, for at most max_attempts calls.
/// Throws ExhaustedRetries, or whatever the provider throws.
Generation generate_hierarchy(const PromptSpec& prompt, const Provider& provider, int max_attempts = 3);

/// The base prompt followed by the problems found in the last answer.
std::string retry_prompt(const std::string& base, const io::ValidationReport& last);

}  // namespace hilayout::llm
