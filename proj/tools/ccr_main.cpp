#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ccr/change.hpp"
#include "ccr/descriptors.hpp"
#include "ccr/eval.hpp"
#include "ccr/index.hpp"
#include "ccr/retrieval.hpp"
#include "ccr/vocabulary.hpp"

namespace fs = std::filesystem;

namespace {

// Config keys without a section apply to the selected subcommand, so a
// plain `key = value` file works for every subcommand.
class SubcommandConfig : public CLI::ConfigINI {
public:
    explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        auto items = CLI::ConfigINI::from_config(in);
        const auto subs = app_->get_subcommands();
        for (auto& item : items) {
            if (item.parents.empty() && !subs.empty()) {
                item.parents = {subs.front()->get_name()};
            }
        }
        return items;
    }

private:
    const CLI::App* app_;
};

// Files as given; directories expand to their *.ccrfs entries. Sorted so the
// result does not depend on argument or directory order.
std::vector<fs::path> expand_feature_paths(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == ".ccrfs") {
                    out.push_back(e.path());
                }
            }
        } else if (fs::exists(p)) {
            out.push_back(p);
        } else {
            throw ccr::Error("cannot open '" + p.string() + "'");
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) {
        throw ccr::Error("no feature-set files found");
    }
    return out;
}

std::vector<ccr::FeatureSet> read_feature_sets(const std::vector<std::string>& inputs) {
    std::vector<ccr::FeatureSet> sets;
    for (const auto& p : expand_feature_paths(inputs)) {
        sets.push_back(ccr::read_feature_set(p));
    }
    return sets;
}

// Renders to memory, then writes to `path` or standard output when empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
    std::ostringstream buf;
    fn(buf);
    if (path.empty() || path == "-") {
        std::cout << buf.str() << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << buf.str()) || !out.flush()) {
        throw ccr::Error("cannot write '" + path + "'");
    }
}

struct Common {
    std::size_t threads = 1;
};

void add_threads(CLI::App* sub, Common& c) {
    sub->add_option("--threads", c.threads, "Worker threads (output is identical for any value)")
        ->check(CLI::PositiveNumber);
}

// ---- build-vocab -----------------------------------------------------------

struct BuildVocabArgs {
    std::vector<std::string> features;
    ccr::KMeansParams params;
    std::string out;
};

void run_build_vocab(const BuildVocabArgs& a, const Common& c) {
    std::vector<std::vector<double>> training;
    for (const auto& fs : read_feature_sets(a.features)) {
        for (const auto& f : fs.features) {
            training.push_back(f.desc);
        }
    }
    auto params = a.params;
    params.threads = c.threads;
    ccr::KMeansReport report;
    const auto vocab = ccr::build_vocabulary(training, params, &report);
    ccr::write_vocabulary(vocab, a.out);
    std::cerr << "vocabulary: " << vocab.size() << " words from " << training.size()
              << " descriptors, " << report.iterations << " iterations, distortion "
              << ccr::format_double(report.distortion.back()) << '\n';
}

// ---- index -----------------------------------------------------------------

struct IndexArgs {
    std::string vocab;
    std::vector<std::string> features;
    std::string out;
};

void run_index(const IndexArgs& a, const Common& c) {
    auto vocab = std::make_shared<const ccr::Vocabulary>(ccr::read_vocabulary(a.vocab));
    const auto sets = read_feature_sets(a.features);
    const auto idx = ccr::build_index(sets, vocab, c.threads);
    ccr::write_index(idx, a.out, a.vocab);
    std::cerr << "index: " << idx.size() << " images\n";
}

// ---- retrieve --------------------------------------------------------------

struct RetrieveArgs {
    std::string index;
    std::string vocab;
    std::string query;
    std::size_t refs = 40;
    std::string out;
};

void run_retrieve(const RetrieveArgs& a, const Common&) {
    const auto idx = ccr::read_index(a.index, a.vocab);
    const auto query = ccr::read_feature_set(a.query);
    const auto res = ccr::rank_references(query.global_desc, idx, a.refs);
    emit(a.out, [&](std::ostream& out) {
        out << "rank,image_id,similarity\n";
        for (std::size_t i = 0; i < res.ranked.size(); ++i) {
            out << (i + 1) << ',' << res.ranked[i].image_id << ','
                << ccr::format_double(res.ranked[i].similarity) << '\n';
        }
    });
}

// ---- detect ----------------------------------------------------------------

struct DetectArgs {
    std::string index;
    std::string vocab;
    std::vector<std::string> queries;
    std::vector<std::string> raw;
    std::string mode = "ccr";
    ccr::DetectOptions opts;
    std::string out;
};

void run_detect(DetectArgs a, const Common& c) {
    a.opts.mode = ccr::parse_mode(a.mode);
    a.opts.threads = c.threads;
    a.opts.validate();
    ccr::FeatureSetStore store;
    if (a.opts.mode == ccr::Mode::kDirect) {
        if (a.raw.empty()) {
            throw ccr::Error("--mode dm needs the raw reference feature sets (--raw)");
        }
        for (auto& fs : read_feature_sets(a.raw)) {
            auto id = fs.image_id;
            if (!store.emplace(id, std::move(fs)).second) {
                throw ccr::Error("duplicate raw reference '" + id + "'");
            }
        }
    }
    const auto idx = ccr::read_index(a.index, a.vocab);
    std::vector<ccr::ChangeResult> results;
    for (const auto& p : expand_feature_paths(a.queries)) {
        const auto query = ccr::read_feature_set(p);
        results.push_back(ccr::detect_changes(query, idx, &store, a.opts));
    }
    std::sort(results.begin(), results.end(),
              [](const auto& x, const auto& y) { return x.query_id < y.query_id; });
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].query_id == results[i - 1].query_id) {
            throw ccr::Error("duplicate query id '" + results[i].query_id + "'");
        }
    }
    emit(a.out, [&](std::ostream& out) { ccr::format_results_csv(results, out); });
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string gt;
    std::vector<std::string> runs;
    std::vector<double> thresholds = ccr::kDefaultThresholds;
    std::string nref;
    std::string out;
    std::string csv;
};

void run_eval(const EvalArgs& a, const Common&) {
    const auto gts = ccr::read_ground_truth(a.gt);
    if (gts.empty()) {
        throw ccr::Error("'" + a.gt + "' holds no ground-truth boxes");
    }
    ccr::TopXTable table;
    table.ref_count = a.nref;
    table.thresholds = a.thresholds;
    for (const auto& run : a.runs) {
        const auto eq = run.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == run.size()) {
            throw CLI::ValidationError("--run", "expected LABEL=PATH, got '" + run + "'");
        }
        const std::string label = run.substr(0, eq), path = run.substr(eq + 1);
        std::map<std::string, ccr::ChangeResult, std::less<>> by_query;
        for (auto& r : ccr::read_results_csv(path)) {
            by_query.emplace(r.query_id, std::move(r));
        }
        std::vector<ccr::RankingOutcome> outcomes;
        for (const auto& gt : gts) {
            const auto it = by_query.find(gt.query_id);
            if (it == by_query.end()) {
                throw ccr::Error("'" + path + "' has no results for query '" + gt.query_id + "'");
            }
            outcomes.push_back(ccr::ranking_percentile(it->second, gt));
        }
        table.rows.push_back({label, ccr::topx_table(outcomes, a.thresholds)});
    }
    emit(a.out, [&](std::ostream& out) { ccr::render_table_text(table, out); });
    if (!a.csv.empty()) {
        emit(a.csv, [&](std::ostream& out) { ccr::render_table_csv(table, out); });
    }
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    ccr::SceneSpec spec;
    std::string query_id = "query";
    std::string out;
};

void run_synth(const SynthArgs& a, const Common&) {
    auto scene = ccr::generate_scene(a.spec);
    scene.query.image_id = a.query_id;
    scene.gt.query_id = a.query_id;
    const fs::path dir(a.out);
    fs::create_directories(dir / "refs");
    for (const auto& r : scene.refs) {
        ccr::write_feature_set(r, dir / "refs" / (r.image_id + ".ccrfs"));
    }
    ccr::write_feature_set(scene.query, dir / (a.query_id + ".ccrfs"));
    ccr::write_ground_truth({scene.gt}, dir / "gt.ccrgt");
    std::cerr << "synth: " << scene.refs.size() << " references, " << scene.planted.size()
              << " planted changes, audit "
              << (scene.audit.separated() ? "separated" : "NOT separated") << '\n';
}

std::string version_text() {
    std::ostringstream out;
    out << "ccr " << ccr::kEngineVersion << '\n'
        << "feature-set format CCRFS " << ccr::kFeatureSetFormatVersion << '\n'
        << "vocabulary format CCRVOC " << ccr::kVocabularyFormatVersion << '\n'
        << "index format CCRIDX " << ccr::kIndexFormatVersion << '\n'
        << "ground-truth format CCRGT " << ccr::kGroundTruthFormatVersion << '\n';
    return out.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressed change detection over visual-word indexes", "ccr"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "key = value file; flags override its entries");
    app.config_formatter(std::make_shared<SubcommandConfig>(&app));
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_version_flag("--version", version_text());

    Common common;

    BuildVocabArgs bv;
    auto* s_bv = app.add_subcommand("build-vocab", "Train a visual vocabulary with k-means");
    s_bv->add_option("--features", bv.features, "Feature-set files or directories")->required();
    s_bv->add_option("--k", bv.params.k, "Vocabulary size")->capture_default_str();
    s_bv->add_option("--seed", bv.params.seed, "k-means seed")->capture_default_str();
    s_bv->add_option("--max-iters", bv.params.max_iters)->capture_default_str();
    s_bv->add_option("--rel-tol", bv.params.rel_tol)->capture_default_str();
    s_bv->add_option("--out", bv.out, "Output vocabulary file")->required();
    add_threads(s_bv, common);

    IndexArgs ix;
    auto* s_ix = app.add_subcommand("index", "Quantize reference images into an inverted index");
    s_ix->add_option("--vocab", ix.vocab, "Vocabulary file")->required();
    s_ix->add_option("--features", ix.features, "Feature-set files or directories")->required();
    s_ix->add_option("--out", ix.out, "Output index file")->required();
    add_threads(s_ix, common);

    RetrieveArgs rt;
    auto* s_rt = app.add_subcommand("retrieve", "Rank indexed images by global similarity");
    s_rt->add_option("--index", rt.index)->required();
    s_rt->add_option("--vocab", rt.vocab, "Override the vocabulary path stored in the index");
    s_rt->add_option("--query", rt.query)->required();
    s_rt->add_option("--refs", rt.refs, "Number of references")->capture_default_str();
    s_rt->add_option("--out", rt.out, "Output CSV (default: standard output)");
    add_threads(s_rt, common);

    DetectArgs dt;
    auto* s_dt = app.add_subcommand("detect", "Score query features for change");
    s_dt->add_option("--index", dt.index)->required();
    s_dt->add_option("--vocab", dt.vocab, "Override the vocabulary path stored in the index");
    s_dt->add_option("--query", dt.queries, "Query feature-set files or directories")->required();
    s_dt->add_option("--raw", dt.raw, "Raw reference feature sets (required for --mode dm)");
    s_dt->add_option("--mode", dt.mode, "dm or ccr")->capture_default_str();
    s_dt->add_flag("--lg", dt.opts.lg, "Restrict candidates by local geometry");
    s_dt->add_flag("--va", dt.opts.va, "Restrict candidates by visibility analysis (needs --lg)");
    s_dt->add_option("--refs", dt.opts.n_refs, "Retrieved references")->capture_default_str();
    s_dt->add_option("--ratio", dt.opts.ratio, "Strong-match ratio")->capture_default_str();
    s_dt->add_option("--delta", dt.opts.delta, "Visibility quantile")->capture_default_str();
    s_dt->add_option("--kmax", dt.opts.k_max, "Match list length minus one")->capture_default_str();
    s_dt->add_flag("--normalize", dt.opts.normalize_descriptors, "L2-normalize descriptors");
    s_dt->add_option("--out", dt.out, "Results CSV (default: standard output)");
    add_threads(s_dt, common);

    EvalArgs ev;
    auto* s_ev = app.add_subcommand("eval", "Top-X success table from results and ground truth");
    s_ev->add_option("--gt", ev.gt, "Ground-truth file")->required();
    s_ev->add_option("--run", ev.runs, "LABEL=RESULTS.csv, one per table row")->required();
    s_ev->add_option("--thresholds", ev.thresholds, "Top-X percent thresholds")
        ->capture_default_str()
        ->delimiter(',');
    s_ev->add_option("--nref", ev.nref, "Value for the #ref column");
    s_ev->add_option("--out", ev.out, "Text table (default: standard output)");
    s_ev->add_option("--csv", ev.csv, "Also write the table as CSV");
    add_threads(s_ev, common);

    SynthArgs sy;
    auto& sp = sy.spec;
    auto* s_sy = app.add_subcommand("synth", "Generate a synthetic scene with planted changes");
    s_sy->add_option("--seed", sp.seed)->capture_default_str();
    s_sy->add_option("--dim", sp.dim)->capture_default_str();
    s_sy->add_option("--world-size", sp.world_size)->capture_default_str();
    s_sy->add_option("--n-refs", sp.n_refs)->capture_default_str();
    s_sy->add_option("--features-per-image", sp.features_per_image)->capture_default_str();
    s_sy->add_option("--obs-noise-sigma", sp.obs_noise_sigma)->capture_default_str();
    s_sy->add_option("--change-count", sp.change_count)->capture_default_str();
    s_sy->add_option("--change-margin", sp.change_margin)->capture_default_str();
    s_sy->add_option("--width", sp.width)->capture_default_str();
    s_sy->add_option("--height", sp.height)->capture_default_str();
    s_sy->add_option("--grid-x", sp.grid_x)->capture_default_str();
    s_sy->add_option("--grid-y", sp.grid_y)->capture_default_str();
    s_sy->add_option("--global-dim", sp.global_dim)->capture_default_str();
    s_sy->add_option("--max-attempts", sp.max_attempts)->capture_default_str();
    s_sy->add_option("--query-id", sy.query_id)->capture_default_str();
    s_sy->add_option("--out", sy.out, "Output directory")->required();
    add_threads(s_sy, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (s_bv->parsed()) {
            run_build_vocab(bv, common);
        } else if (s_ix->parsed()) {
            run_index(ix, common);
        } else if (s_rt->parsed()) {
            run_retrieve(rt, common);
        } else if (s_dt->parsed()) {
            run_detect(dt, common);
        } else if (s_ev->parsed()) {
            run_eval(ev, common);
        } else if (s_sy->parsed()) {
            run_synth(sy, common);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ccr::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
