#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <csignal>
#include <filesystem>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "hilayout/catalog.hpp"
#include "hilayout/corpus.hpp"
#include "hilayout/error.hpp"
#include "hilayout/metrics.hpp"
#include "hilayout/pipeline.hpp"
#include "hilayout/server.hpp"

using namespace hilayout;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitProvider = 3;

std::string data_dir() {
    if (const char* d = std::getenv("HILAYOUT_DATA")) return d;
    return HILAYOUT_DEFAULT_DATA_DIR;
}

struct Common {
    std::string provider = "fixture";
    std::string fixtures_dir;
    std::string transcripts_dir;
    std::string record_dir;
    std::uint64_t seed = 1;
    std::string checkpoint;
    bool rule_fallback = false;
    std::string solver_config;
    std::string catalog;
    bool no_catalog = false;
    bool open_vocabulary = false;
    std::string embeddings;
    int max_attempts = 3;

    void add_provider(CLI::App* app) {
        app->add_option("--provider", provider, "fixture, replay or remote")
            ->check(CLI::IsMember({"fixture", "replay", "remote"}));
        app->add_option("--fixtures-dir", fixtures_dir, "offline fixture directory");
        app->add_option("--transcripts-dir", transcripts_dir, "recorded transcripts for --provider replay");
        app->add_option("--record-transcripts", record_dir, "write every provider exchange to this directory");
        app->add_option("--max-attempts", max_attempts, "provider calls before giving up")->check(CLI::PositiveNumber);
        app->add_flag("--open-vocabulary", open_vocabulary, "drop the object category list from prompts");
    }
    void add_solver(CLI::App* app) {
        app->add_option("--seed", seed, "random seed");
        app->add_option("--checkpoint", checkpoint, "trained placement network");
        app->add_flag("--rule-fallback", rule_fallback, "use canonical relation offsets instead of the network");
        app->add_option("--solver-config", solver_config, "solver configuration JSON");
        app->add_option("--catalog", catalog, "asset catalog file");
        app->add_flag("--no-catalog", no_catalog, "leave assets unassigned");
        app->add_option("--embeddings", embeddings, "external text embedding table");
    }

    TextEmbedder embedder() const {
        return embeddings.empty() ? TextEmbedder{} : TextEmbedder::load_external(embeddings);
    }

    std::shared_ptr<const llm::Provider> make_provider() const {
        llm::ProviderConfig pc;
        pc.kind = llm::ProviderConfig::parse_kind(provider);
        pc.fixtures_dir = fixtures_dir.empty() ? data_dir() + "/fixtures" : fixtures_dir;
        pc.transcripts_dir = transcripts_dir.empty() ? data_dir() + "/fixtures/transcripts" : transcripts_dir;
        pc.record_dir = record_dir;
        return llm::make_provider(pc);
    }

    std::shared_ptr<const PlacementNet> make_net() const {
        if (rule_fallback) return nullptr;
        if (checkpoint.empty()) throw std::invalid_argument("--checkpoint or --rule-fallback is required");
        const auto ck = load_checkpoint(checkpoint);
        return std::make_shared<PlacementNet>(ck.net, ck.params);
    }

    Pipeline make_pipeline() const {
        PipelineOptions opt;
        if (open_vocabulary) opt.prompt = llm::PromptConfig::open_vocabulary();
        if (!solver_config.empty()) opt.solver = SolverConfig::from_json(json::parse(io::read_file(solver_config)));
        opt.max_attempts = max_attempts;
        std::shared_ptr<const Catalog> cat;
        const auto emb = embedder();
        if (!no_catalog) {
            cat = std::make_shared<Catalog>(Catalog::load(catalog.empty() ? data_dir() + "/catalog/default.cat" : catalog, emb));
        }
        return Pipeline(make_provider(), make_net(), cat, opt, emb);
    }
};

Vec2 parse_room(const std::string& s) {
    const auto x = s.find_first_of("xX");
    if (x == std::string::npos) throw CLI::ValidationError("--room", "expected WxD, e.g. 3.5x4");
    try {
        return {std::stod(s.substr(0, x)), std::stod(s.substr(x + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--room", "expected WxD, e.g. 3.5x4");
    }
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        io::write_file(path, text);
    }
}

std::vector<fs::path> files_with(const std::string& dir, std::initializer_list<const char*> exts) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// A solved layout document, or a posed hierarchy composed into one.
SceneLayout read_layout(const fs::path& p) {
    const auto parsed = io::parse({io::read_file(p.string())});
    if (!parsed.report.ok()) throw FormatError(p.string() + ":\n" + parsed.report.summary());
    if (parsed.layout) return *parsed.layout;
    return to_scene_frame(*parsed.hierarchy);
}

std::vector<SceneLayout> read_layouts(const std::string& dir) {
    std::vector<SceneLayout> out;
    for (const auto& p : files_with(dir, {".hilayout", ".hi"})) out.push_back(read_layout(p));
    if (out.empty()) throw IoError("no scene documents in " + dir);
    return out;
}

std::vector<SceneHierarchy> read_hierarchies(const std::string& dir) {
    std::vector<SceneHierarchy> out;
    for (const auto& p : files_with(dir, {".hi"})) out.push_back(io::parse_hierarchy({io::read_file(p.string())}));
    return out;
}

void print_deltas(const std::vector<PoseDelta>& deltas) {
    for (const auto& d : deltas) {
        std::cerr << fmt::format("  {:<20} {:<9} {:.4f} m  {:+d} turns\n", d.id, to_string(d.kind), d.distance, d.turns);
    }
}

// ---------------------------------------------------------------------------

int run_synth(const Common& c, const std::string& requirement, const std::string& room, const std::string& out,
              const std::string& plot) {
    const auto pipeline = c.make_pipeline();
    const auto r = pipeline.synth(requirement, parse_room(room), c.seed);
    write_or_print(out, io::serialize(r.layout).text);
    if (!plot.empty()) io::write_file(plot, render_svg(r.layout));
    std::cerr << fmt::format("synthesized {} objects in {} areas ({:.2f} s, {} provider call{}, {} repair{})\n",
                             r.layout.objects.size(), r.layout.hierarchy.areas.size(), r.seconds,
                             r.generation.attempts.size(), r.generation.attempts.size() == 1 ? "" : "s",
                             r.repair.dropped.size(), r.repair.dropped.size() == 1 ? "" : "s");
    return kExitOk;
}

int run_edit(const Common& c, const std::string& layout_path, const std::string& instruction, const std::string& out,
             const std::string& plot) {
    const auto pipeline = c.make_pipeline();
    const auto current = io::parse_layout({io::read_file(layout_path)});
    const auto r = pipeline.edit(current, instruction, c.seed);
    write_or_print(out, io::serialize(r.layout).text);
    if (!plot.empty()) io::write_file(plot, render_svg(r.layout));
    std::cerr << "pose deltas:\n";
    print_deltas(r.deltas);
    return kExitOk;
}

struct TrainArgs {
    int corpus_size = 2000;
    std::uint64_t corpus_seed = 1;
    std::string ingest;
    std::string hierarchies;
    std::string config;
    int epochs = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string resume;
    std::string log;
    int every = 0;
    int stop_after = 0;
    std::string embeddings;
};

int run_train(const TrainArgs& a) {
    std::vector<SceneHierarchy> scenes;
    if (!a.ingest.empty()) {
        corpus::IngestReport rep;
        scenes = corpus::ingest_3dfront(a.ingest, {}, &rep);
        std::cerr << "ingested: " << rep.to_json().dump() << "\n";
    } else if (!a.hierarchies.empty()) {
        scenes = read_hierarchies(a.hierarchies);
    } else {
        scenes = corpus::generate(static_cast<std::size_t>(std::max(0, a.corpus_size)), a.corpus_seed);
    }
    if (scenes.empty()) throw std::invalid_argument("the training corpus is empty");

    std::optional<Checkpoint> resume;
    if (!a.resume.empty()) resume = load_checkpoint(a.resume);
    TrainConfig cfg;
    if (!a.config.empty()) {
        cfg = TrainConfig::from_json(json::parse(io::read_file(a.config)));
    } else if (resume && !resume->train_config.is_null()) {
        cfg = TrainConfig::from_json(resume->train_config);
    }
    if (a.epochs > 0) cfg.epochs = a.epochs;
    if (a.seed > 0) cfg.seed = a.seed;

    const TextEmbedder emb = a.embeddings.empty() ? TextEmbedder{} : TextEmbedder::load_external(a.embeddings);
    Trainer trainer = resume ? Trainer(cfg, scenes, *resume, emb) : Trainer(cfg, scenes, emb);
    std::cerr << fmt::format("training on {} scenes for {} epochs (starting at {})\n", scenes.size(), cfg.epochs,
                             trainer.epoch());
    std::string log_text;
    const auto log_line = [&](int epoch, const LossBreakdown& l) {
        log_text += json{{"epoch", epoch + 1}, {"beta", cfg.kl_weight(epoch)}, {"total", l.total}, {"kl", l.kl},
                         {"ep", l.ep},         {"etheta", l.etheta},          {"ed", l.ed}}
                        .dump() +
                    "\n";
    };
    for (std::size_t i = 0; i < trainer.history().size(); ++i) log_line(static_cast<int>(i), trainer.history()[i]);
    int ran = 0;
    while (!trainer.done() && (a.stop_after <= 0 || ran < a.stop_after)) {
        ++ran;
        const int epoch = trainer.epoch();
        const auto t0 = std::chrono::steady_clock::now();
        const auto l = trainer.run_epoch();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << fmt::format("epoch {:>4}  total {:.5f}  kl {:.5f}  ep {:.5f}  etheta {:.5f}  ed {:.5f}  ({:.1f} s)\n",
                                 epoch + 1, l.total, l.kl, l.ep, l.etheta, l.ed, secs);
        log_line(epoch, l);
        if (!a.log.empty()) io::write_file(a.log, log_text);
        if (a.every > 0 && trainer.epoch() % a.every == 0 && !trainer.done()) save_checkpoint(trainer.checkpoint(), a.out);
    }
    save_checkpoint(trainer.checkpoint(), a.out);
    return kExitOk;
}

int run_infer(const Common& c, const std::string& hierarchy, const std::string& out) {
    const auto h = io::parse_hierarchy({io::read_file(hierarchy)});
    const auto net = c.make_net();
    const PlacementMap preds = net ? net->infer(h, c.seed, c.embedder()) : rule_predictions(h);
    json j = json::object();
    for (const auto& [id, p] : preds) {
        j[id] = {{"position", {p.position.x, p.position.y}},
                 {"theta_probs", p.theta_probs},
                 {"theta", p.theta().degrees()},
                 {"aligned_prob", p.aligned_prob}};
    }
    write_or_print(out, j.dump(2) + "\n");
    return kExitOk;
}

int run_eval(const std::string& generated, const std::string& reference, const std::string& sources,
             const std::string& pairs, const std::string& out) {
    const auto gen = read_layouts(generated);
    metrics::MetricReport report;
    report.feasibility = metrics::feasibility_metrics(gen);
    if (!reference.empty()) {
        const auto ref = read_layouts(reference);
        const auto ps = pairs.empty() ? metrics::default_pairs() : metrics::parse_pairs(pairs);
        metrics::KlConfig fine = report.kl_config;
        fine.bins *= 2;
        report.kl = metrics::kl_relative_placement(gen, ref, ps, report.kl_config);
        report.kl_fine = metrics::kl_relative_placement(gen, ref, ps, fine);
        report.has_kl = true;
    }
    std::vector<std::pair<SceneHierarchy, SceneLayout>> runs;
    const auto gen_files = files_with(generated, {".hilayout", ".hi"});
    for (std::size_t i = 0; i < gen.size(); ++i) {
        SceneHierarchy src = gen[i].hierarchy;
        if (!sources.empty()) {
            const auto p = fs::path(sources) / (gen_files[i].stem().string() + ".hi");
            if (fs::exists(p)) src = io::parse_hierarchy({io::read_file(p.string())});
        }
        runs.emplace_back(std::move(src), gen[i]);
    }
    report.alignment = metrics::semantic_alignment(runs);
    if (!out.empty()) io::write_file(out, report.to_json().dump(2) + "\n");
    std::cout << report.table();
    return kExitOk;
}

SceneServer* g_server = nullptr;

int run_serve(const Common& c, ServerConfig cfg) {
    auto pipeline = std::make_shared<Pipeline>(c.make_pipeline());
    cfg.seed = c.seed;
    SceneServer server(pipeline, cfg);
    const int port = server.bind();
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    std::cerr << fmt::format("listening on http://{}:{} ({} provider, {})\n", cfg.host, port, c.provider,
                             pipeline->uses_network() ? "network" : "rule fallback");
    server.listen();
    g_server = nullptr;
    return kExitOk;
}

struct GenerateArgs {
    std::size_t count = 0;
    std::uint64_t seed = 1;
    std::string templ;
    std::optional<double> untexted;
    bool strip = false;
    std::string prefix = "scene";
    std::string out;
};

int run_corpus_generate(const GenerateArgs& a) {
    corpus::GeneratorConfig cfg;
    if (a.untexted) cfg.untexted_fraction = *a.untexted;
    fs::create_directories(a.out);
    auto scenes = a.templ.empty() ? corpus::generate(a.count, a.seed, cfg)
                                  : corpus::generate(corpus::find_template(a.templ), a.count, a.seed, cfg);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (a.strip) scenes[i] = llm::strip_layout(scenes[i]);
        io::write_file((fs::path(a.out) / fmt::format("{}_{:05d}.hi", a.prefix, i)).string(),
                       io::serialize(scenes[i]).text);
    }
    auto m = corpus::manifest(a.count, a.seed, cfg);
    if (!a.templ.empty()) m["template"] = a.templ;
    m["poses"] = !a.strip;
    io::write_file((fs::path(a.out) / (a.prefix + "_manifest.json")).string(), m.dump(2) + "\n");
    std::cerr << "wrote " << scenes.size() << " scenes to " << a.out << "\n";
    return kExitOk;
}

int run_corpus_ingest(const std::string& input, const std::string& out) {
    corpus::IngestReport rep;
    const auto scenes = corpus::ingest_3dfront(input, {}, &rep);
    fs::create_directories(out);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        io::write_file((fs::path(out) / fmt::format("room_{:05d}.hi", i)).string(), io::serialize(scenes[i]).text);
    }
    io::write_file((fs::path(out) / "ingest_report.json").string(), rep.to_json().dump(2) + "\n");
    std::cerr << rep.to_json().dump() << "\n";
    return kExitOk;
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const Infeasible& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const Unrepairable& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const ProviderError& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitProvider;
    } catch (const FixtureMissing& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitProvider;
    } catch (const ExhaustedRetries& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitProvider;
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical indoor scene layout synthesis"};
    app.require_subcommand(1);
    Common common;

    std::string requirement, room, out, plot;
    auto* synth = app.add_subcommand("synth", "synthesize a layout from a requirement");
    common.add_provider(synth);
    common.add_solver(synth);
    synth->add_option("--requirement", requirement, "what the room should contain")->required();
    synth->add_option("--room", room, "room size WxD in meters")->required();
    synth->add_option("--out,-o", out, "layout file (default: standard output)");
    synth->add_option("--plot", plot, "top-view SVG file");

    std::string layout_path, instruction;
    auto* edit = app.add_subcommand("edit", "apply a language instruction to a layout");
    common.add_provider(edit);
    common.add_solver(edit);
    edit->add_option("--layout", layout_path, "current layout file")->required()->check(CLI::ExistingFile);
    edit->add_option("--instruction", instruction, "editing instruction")->required();
    edit->add_option("--out,-o", out, "updated layout file (default: standard output)");
    edit->add_option("--plot", plot, "top-view SVG file");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train the placement network");
    train->add_option("--corpus-size", ta.corpus_size, "synthetic scenes to generate");
    train->add_option("--corpus-seed", ta.corpus_seed, "seed of the synthetic corpus");
    train->add_option("--ingest", ta.ingest, "train on 3D-Front house files from this directory");
    train->add_option("--hierarchies", ta.hierarchies, "train on posed .hi files from this directory");
    train->add_option("--config", ta.config, "training configuration JSON");
    train->add_option("--epochs", ta.epochs, "override the configured epoch count");
    train->add_option("--seed", ta.seed, "override the configured seed");
    train->add_option("--out,-o", ta.out, "checkpoint file")->required();
    train->add_option("--resume", ta.resume, "continue from this checkpoint")->check(CLI::ExistingFile);
    train->add_option("--log", ta.log, "per-epoch loss curve, one JSON object per line");
    train->add_option("--checkpoint-every", ta.every, "also save every N epochs");
    train->add_option("--stop-after", ta.stop_after, "save and stop after N epochs of this run; continue with --resume");
    train->add_option("--embeddings", ta.embeddings, "external text embedding table");

    std::string hierarchy;
    auto* infer = app.add_subcommand("infer", "predict relative placements for a hierarchy");
    common.add_solver(infer);
    infer->add_option("--hierarchy", hierarchy, "hierarchy file")->required()->check(CLI::ExistingFile);
    infer->add_option("--out,-o", out, "predictions JSON (default: standard output)");

    std::string generated, reference, sources, pairs;
    auto* eval = app.add_subcommand("eval", "compute layout metrics");
    eval->add_option("--generated", generated, "directory of generated layouts")->required();
    eval->add_option("--reference", reference, "directory of reference layouts or posed hierarchies");
    eval->add_option("--sources", sources, "source hierarchies, matched to layouts by file stem");
    eval->add_option("--pairs", pairs, "anchor:satellite category pairs, comma separated");
    eval->add_option("--out,-o", out, "metric report JSON");

    ServerConfig sc;
    auto* serve = app.add_subcommand("serve", "run the HTTP service for interactive editing");
    common.add_provider(serve);
    common.add_solver(serve);
    serve->add_option("--host", sc.host, "bind address");
    serve->add_option("--port", sc.port, "port, 0 for any");
    serve->add_option("--static", sc.static_dir, "UI bundle directory served under /")->check(CLI::ExistingDirectory);
    serve->add_option("--snapshot-dir", sc.snapshot_dir, "write sessions here on shutdown");
    serve->add_option("--history", sc.history, "undo snapshots per session");
    serve->add_option("--workers", sc.workers, "request worker threads")->check(CLI::PositiveNumber);

    GenerateArgs ga;
    std::string input;
    auto* corpus_cmd = app.add_subcommand("corpus", "build training corpora");
    corpus_cmd->require_subcommand(1);
    auto* gen = corpus_cmd->add_subcommand("generate", "write synthetic scenes");
    gen->add_option("--count", ga.count, "number of scenes")->required();
    gen->add_option("--seed", ga.seed, "corpus seed");
    gen->add_option("--template", ga.templ, "only this room template")->check(CLI::IsMember({"bedroom", "living_room"}));
    gen->add_option("--untexted-fraction", ga.untexted, "share of relations without a phrase")->check(CLI::Range(0.0, 1.0));
    gen->add_flag("--strip-poses", ga.strip, "write unposed hierarchies, as a language model would");
    gen->add_option("--prefix", ga.prefix, "file name prefix");
    gen->add_option("--out,-o", ga.out, "output directory")->required();
    auto* ingest = corpus_cmd->add_subcommand("ingest", "convert 3D-Front house files");
    ingest->add_option("--input", input, "directory of house JSON files")->required();
    ingest->add_option("--out,-o", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return run_synth(common, requirement, room, out, plot);
        if (*edit) return run_edit(common, layout_path, instruction, out, plot);
        if (*train) return run_train(ta);
        if (*infer) return run_infer(common, hierarchy, out);
        if (*eval) return run_eval(generated, reference, sources, pairs, out);
        if (*serve) return run_serve(common, sc);
        if (*gen) return run_corpus_generate(ga);
        if (*ingest) return run_corpus_ingest(input, out);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (...) {
        return exit_code_for_current_exception();
    }
    return kExitError;
}
