#include "hilayout/llm_client.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "hilayout/corpus.hpp"
#include "hilayout/error.hpp"
#include "hilayout/relations.hpp"
#include "hilayout/text_embed.hpp"
#include "json.hpp"

namespace hilayout::llm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRequirementTag = "Requirement: ";
constexpr const char* kInstructionTag = "Instruction: ";

constexpr const char* kRoleTask =
    "You are an interior layout designer. You describe an indoor scene as a hierarchy with three levels: "
    "the room at the root, functional areas below it, and furniture objects as leaves. A functional area "
    "groups the objects that serve one activity, such as sleeping or dining, and has its own rectangular "
    "size. Every area names exactly one anchor object, the main piece of furniture of the area. Each other "
    "object of the area is tied to the anchor by a spatial relation describing where it stands relative to "
    "the anchor.\n"
    "Task: given a requirement and the room size, write the scene hierarchy as a single document.";

constexpr const char* kExample = R"(format: hilayout/1

scene {
  text: "a compact home office"
  size: 3 2.8
}

area work_area {
  text: "work area with a desk by the window"
  size: 2 1.7
  anchor: desk

  object desk {
    text: "oak writing desk"
    category: "desk"
    size: 1.2 0.6 0.75
  }

  object desk_chair {
    text: "black office chair"
    category: "desk_chair"
    size: 0.55 0.55 1
  }
}

relation desk_chair -> desk {
  text: "in front of"
}
)";

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string format_constraints(const PromptConfig& cfg) {
    std::ostringstream os;
    os << "Data format: the first line is \"format: hilayout/1\". Then a scene block with text and size "
          "(width and depth in meters), one area block per functional area, and one relation block per "
          "non-anchor object. An area block has text, size (width and depth in meters), anchor (the id of one "
          "of its objects) and its object blocks. An object block has text, category and size (width, depth "
          "and height in meters). Ids are lowercase letters, digits and underscores and are unique. A "
          "relation block \"relation <object> -> <anchor>\" holds the relation text. Do not give positions "
          "or orientations.\n";
    os << "Area types: sleeping area, work area, storage area, lounge area, dining area.\n";
    os << "Anchor objects: bed, desk, wardrobe, sofa, dining_table.\n";
    os << "Relations, used verbatim:";
    for (auto r : all_relations()) os << " \"" << phrase(r) << "\"";
    os << ".\n";
    if (!cfg.categories.empty()) {
        os << "Object categories, use only these:";
        for (const auto& c : cfg.categories) os << " " << c;
        os << ".\n";
    }
    os << "Answer with the document only.";
    return os.str();
}

std::string size_text(Vec2 s) {
    return io::format_number(s.x) + " x " + io::format_number(s.y) + " meters";
}

std::string single_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return trim(s);
}

std::optional<std::string> tagged_line(const std::string& prompt, const std::string& tag) {
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(tag, 0) == 0) return trim(line.substr(tag.size()));
    }
    return std::nullopt;
}

std::string read_text(const fs::path& p) {
    try {
        return io::read_file(p.string());
    } catch (const std::exception&) {
        throw FixtureMissing("cannot read fixture " + p.string());
    }
}

struct Url {
    std::string origin;  ///< scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ProviderError("endpoint is not a URL: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

std::string env_or(const std::string& value, const char* var) {
    if (!value.empty()) return value;
    const char* v = std::getenv(var);
    return v ? v : "";
}

}  // namespace

PromptConfig PromptConfig::closed_vocabulary() {
    PromptConfig c;
    for (const auto& [category, range] : corpus::category_sizes()) c.categories.push_back(category);
    return c;
}

std::string PromptSpec::text() const {
    return role_task + "\n\n" + format_constraints + "\n\n" + example_and_request + "\n";
}

PromptSpec build_prompt(const std::string& requirement, Vec2 room_size, const PromptConfig& cfg) {
    const std::string req = single_line(requirement);
    if (req.empty()) throw std::invalid_argument("empty requirement");
    if (!(room_size.x > 0 && room_size.y > 0)) throw std::invalid_argument("room size must be positive");
    PromptSpec p;
    p.role_task = kRoleTask;
    p.format_constraints = format_constraints(cfg);
    if (!cfg.categories.empty()) p.category_constraint = cfg.categories;
    p.example_and_request = std::string("Example of a simple scene, for the format only:\n") + kExample + "\n" +
                            kRequirementTag + req + "\nRoom size: " + size_text(room_size);
    return p;
}

PromptSpec build_edit_prompt(const SceneHierarchy& current, const std::string& instruction, const PromptConfig& cfg) {
    const std::string instr = single_line(instruction);
    if (instr.empty()) throw std::invalid_argument("empty instruction");
    PromptSpec p;
    p.role_task = std::string(kRoleTask) +
                  "\nYou are now editing an existing scene. Apply the instruction by adding, removing or changing "
                  "objects and keep everything the instruction does not mention exactly as it is.";
    p.format_constraints = format_constraints(cfg);
    if (!cfg.categories.empty()) p.category_constraint = cfg.categories;
    p.example_and_request = "Current scene:\n" + io::serialize(strip_layout(current)).text + "\n" + kInstructionTag +
                            instr + "\nRoom size: " + size_text(current.root.size) +
                            "\nAnswer with the complete updated document.";
    return p;
}

SceneHierarchy strip_layout(const SceneHierarchy& h) {
    SceneHierarchy out = h;
    for (auto& a : out.areas) a.pose.reset();
    for (auto& [id, o] : out.objects) {
        o.pose.reset();
        o.asset.reset();
    }
    for (auto& e : out.relations) e.placement.reset();
    return out;
}

FixtureProvider::FixtureProvider(const std::string& dir) : dir_(dir) {
    const fs::path index = fs::path(dir) / "index.json";
    if (!fs::is_directory(dir) || !fs::exists(index)) throw FixtureMissing("no fixture index in " + dir);
    json j;
    try {
        j = json::parse(io::read_file(index.string()));
        for (const auto& r : j.value("requests", json::array())) {
            Entry e;
            for (const auto& k : r.at("keywords")) e.keywords.push_back(lower(k.get<std::string>()));
            e.file = r.at("file").get<std::string>();
            requests_.push_back(std::move(e));
        }
        for (const auto& r : j.value("edits", json::array())) {
            Entry e;
            e.instruction = lower(trim(r.at("instruction").get<std::string>()));
            e.file = r.at("file").get<std::string>();
            edits_.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw FormatError("bad fixture index " + index.string() + ": " + e.what());
    }
}

std::string FixtureProvider::complete(const std::string& prompt) const {
    if (const auto instr = tagged_line(prompt, kInstructionTag)) {
        const std::string key = lower(*instr);
        for (const auto& e : edits_) {
            if (e.instruction == key) return read_text(fs::path(dir_) / e.file);
        }
        throw FixtureMissing("no edit fixture for \"" + *instr + "\"");
    }
    const auto req = tagged_line(prompt, kRequirementTag);
    if (!req) throw FixtureMissing("prompt has no requirement line");
    const auto tokens = tokenize(*req);
    for (const auto& e : requests_) {
        const bool all = std::all_of(e.keywords.begin(), e.keywords.end(), [&](const std::string& k) {
            return std::find(tokens.begin(), tokens.end(), k) != tokens.end();
        });
        if (all) return read_text(fs::path(dir_) / e.file);
    }
    throw FixtureMissing("no fixture matches \"" + *req + "\"");
}

std::string transcript_key(const std::string& prompt) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : prompt) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string transcript_path(const std::string& dir, const std::string& prompt) {
    return (fs::path(dir) / (transcript_key(prompt) + ".json")).string();
}

ReplayProvider::ReplayProvider(std::string dir) : dir_(std::move(dir)) {
    if (!fs::is_directory(dir_)) throw FixtureMissing("no transcript directory " + dir_);
}

std::string ReplayProvider::complete(const std::string& prompt) const {
    const std::string path = transcript_path(dir_, prompt);
    if (!fs::exists(path)) throw FixtureMissing("no transcript for prompt " + transcript_key(prompt) + " in " + dir_);
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("bad transcript " + path + ": " + e.what());
    }
    if (j.at("prompt").get<std::string>() != prompt) throw FixtureMissing("transcript key collision at " + path);
    return j.at("response").get<std::string>();
}

RemoteProvider::RemoteProvider(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

std::string RemoteProvider::complete(const std::string& prompt) const {
    const std::string endpoint = env_or(cfg_.endpoint, "HILAYOUT_LLM_ENDPOINT");
    if (endpoint.empty()) throw ProviderError("no endpoint configured; set HILAYOUT_LLM_ENDPOINT");
    const Url url = split_url(endpoint);
    httplib::Client cli(url.origin);
    if (!cli.is_valid()) throw ProviderError("unsupported endpoint " + endpoint);
    cli.set_connection_timeout(cfg_.connect_timeout_s, 0);
    cli.set_read_timeout(cfg_.read_timeout_s, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) headers.emplace("Authorization", std::string("Bearer ") + key);

    json body{{"messages", json::array({{{"role", "user"}, {"content", prompt}}})}, {"temperature", cfg_.temperature}};
    const std::string model = env_or(cfg_.model, "HILAYOUT_LLM_MODEL");
    if (!model.empty()) body["model"] = model;

    auto res = cli.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw ProviderError("request to " + url.origin + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ProviderError("provider returned HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unexpected provider response: ") + e.what());
    }
}

RecordingProvider::RecordingProvider(std::shared_ptr<const Provider> inner, std::string dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {}

std::string RecordingProvider::complete(const std::string& prompt) const {
    std::string response = inner_->complete(prompt);
    const json j{{"format", "hilayout-transcript/1"}, {"provider", inner_->name()}, {"prompt", prompt}, {"response", response}};
    std::lock_guard lock(mu_);
    fs::create_directories(dir_);
    io::write_file(transcript_path(dir_, prompt), j.dump(2) + "\n");
    return response;
}

ProviderKind ProviderConfig::parse_kind(const std::string& s) {
    if (s == "fixture") return ProviderKind::Fixture;
    if (s == "replay") return ProviderKind::Replay;
    if (s == "remote") return ProviderKind::Remote;
    throw std::invalid_argument("unknown provider " + s + " (expected fixture, replay or remote)");
}

std::shared_ptr<const Provider> make_provider(const ProviderConfig& cfg) {
    std::shared_ptr<const Provider> p;
    switch (cfg.kind) {
        case ProviderKind::Fixture: p = std::make_shared<FixtureProvider>(cfg.fixtures_dir); break;
        case ProviderKind::Replay: p = std::make_shared<ReplayProvider>(cfg.transcripts_dir); break;
        case ProviderKind::Remote: p = std::make_shared<RemoteProvider>(cfg.remote); break;
    }
    if (!cfg.record_dir.empty()) p = std::make_shared<RecordingProvider>(p, cfg.record_dir);
    return p;
}

std::string retry_prompt(const std::string& base, const io::ValidationReport& last) {
    return base + "\nYour previous answer was rejected:\n" + last.summary() +
           "Answer again with the complete corrected document only.\n";
}

Generation generate_hierarchy(const PromptSpec& prompt, const Provider& provider, int max_attempts) {
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be at least 1");
    const std::string base = prompt.text();
    Generation g;
    for (int k = 0; k < max_attempts; ++k) {
        Attempt a;
        a.prompt = k == 0 ? base : retry_prompt(base, g.attempts.back().report);
        a.response = provider.complete(a.prompt);
        auto parsed = io::parse({a.response});
        a.report = parsed.report;
        g.attempts.push_back(a);
        if (parsed.report.ok() && parsed.hierarchy) {
            g.document = {a.response};
            g.hierarchy = std::move(*parsed.hierarchy);
            g.report = std::move(parsed.report);
            return g;
        }
    }
    throw ExhaustedRetries("no valid document after " + std::to_string(max_attempts) + " attempts; last errors:\n" +
                           g.attempts.back().report.summary());
}

}  // namespace hilayout::llm
