#include "gnnrisk/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "gnnrisk/checkpoint.hpp"
#include "gnnrisk/digest.hpp"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/io.hpp"
#include "gnnrisk/pipeline.hpp"
#include "gnnrisk/synthetic.hpp"
#include "gnnrisk/training.hpp"

namespace gnnrisk {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Config files: flat JSON objects or key=value lines. Keys are flag names
// with or without the leading dashes; '_' and '-' are interchangeable.
class FlatConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::vector<CLI::ConfigItem> items;
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            json j;
            try {
                j = json::parse(text);
            } catch (const json::exception& e) {
                throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
            }
            for (const auto& [key, value] : j.items()) {
                CLI::ConfigItem item;
                item.name = key;
                if (value.is_object() || value.is_null()) {
                    throw ConfigError("config key '" + key + "' must hold a scalar or a list");
                }
                if (value.is_array()) {
                    for (const auto& v : value) item.inputs.push_back(scalar_text(v));
                } else {
                    item.inputs.push_back(scalar_text(value));
                }
                items.push_back(std::move(item));
            }
        } else {
            std::istringstream again(text);
            items = CLI::ConfigTOML::from_config(again);
        }
        for (auto& item : items) {
            while (!item.name.empty() && item.name.front() == '-') item.name.erase(0, 1);
            std::replace(item.name.begin(), item.name.end(), '_', '-');
        }
        return items;
    }

private:
    static std::string scalar_text(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }
};

// CLI11 only reads config files on the top-level app, so subcommands apply
// theirs here. Options already given on the command line keep their value.
void apply_config(CLI::App* sub, const FlatConfig& formatter) {
    CLI::Option* opt = sub->get_config_ptr();
    if (opt == nullptr || opt->count() == 0) return;
    const std::string path = opt->as<std::string>();
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    for (const CLI::ConfigItem& item : formatter.from_config(in)) {
        CLI::Option* target = nullptr;
        try {
            target = sub->get_option("--" + item.name);
        } catch (const CLI::OptionNotFound&) {
            throw ConfigError("unknown key '" + item.name + "' in config file " + path);
        }
        if (target == opt) throw ConfigError("config files cannot include other config files");
        if (target->count() > 0) continue;
        target->add_result(item.inputs);
        target->run_callback();
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string() +
                      (ec ? ": " + ec.message() : ""));
    }
}

fs::path require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw IoError("missing artifact " + path.string());
    return path;
}

json read_manifest(const fs::path& dir) {
    const fs::path p = dir / "manifest.json";
    if (!fs::exists(p)) return json::object();
    try {
        return json::parse(read_text_file(p));
    } catch (const json::exception& e) {
        throw ParseError("malformed " + p.string() + ": " + e.what());
    }
}

json digests(const std::vector<fs::path>& files) {
    json out = json::object();
    for (const auto& f : files) out[f.filename().string()] = file_sha256_hex(f);
    return out;
}

// Merges one command's record into `dir`/manifest.json.
void record(const fs::path& dir, const std::string& command, const json& config,
            const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
            const json& extra = json::object()) {
    json m = read_manifest(dir);
    m["tool"] = "gnnrisk";
    m["version"] = GNNRISK_VERSION;
    if (config.contains("seed")) m["seed"] = config["seed"];
    json entry = json::object();
    entry["config"] = config;
    entry["inputs"] = digests(inputs);
    entry["outputs"] = digests(outputs);
    for (const auto& [k, v] : extra.items()) entry[k] = v;
    m["commands"][command] = entry;
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::string fmt(double v) { return format_double(v); }

json synth_json(const SynthConfig& c) {
    json j;
    j["num_nodes"] = c.num_nodes;
    j["target_edges"] = c.target_edges;
    j["anomaly_rate"] = c.anomaly_rate;
    j["mix"] = {c.mix[0], c.mix[1], c.mix[2]};
    j["feature_dim"] = c.feature_dim;
    j["signal_strength"] = c.signal_strength;
    j["seed"] = c.seed;
    j["backbone"] = c.backbone == Backbone::preferential_attachment ? "pa" : "sbm";
    j["split"] = {c.split[0], c.split[1], c.split[2]};
    return j;
}

json train_json(const TrainConfig& c, bool directed) {
    json j;
    j["entity_num"] = c.entity_num;
    j["embed_size"] = c.embed_size;
    j["attention_heads"] = c.attention_heads;
    j["head_dim"] = c.head_dim;
    j["dropout"] = c.dropout;
    j["lr"] = c.lr;
    j["epochs"] = c.epochs;
    j["batches_per_epoch"] = c.batches_per_epoch;
    j["seed"] = c.seed;
    j["agg"] = to_string(c.agg);
    j["self_loops"] = c.self_loops;
    j["class_weights"] = c.class_weights;
    j["gcn_layers"] = c.gcn_layers;
    j["attention_layers"] = c.attention_layers;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
    j["directed"] = directed;
    return j;
}

bool trained_directed(const fs::path& run) {
    const json m = read_manifest(run);
    if (m.contains("commands") && m["commands"].contains("train")) {
        return m["commands"]["train"]["config"].value("directed", false);
    }
    return false;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    SynthConfig cfg;
    std::string mix = "0.5,0.25,0.25";
    std::string backbone = "pa";
    fs::path out;
};

void cmd_generate(GenerateArgs a, std::ostream& out) {
    const auto parts = split_csv(a.mix);
    if (parts.size() != 3) throw ConfigError("--mix needs three comma-separated weights (ring,hub,bridge)");
    for (std::size_t i = 0; i < 3; ++i) a.cfg.mix[i] = parse_double(parts[i], "--mix");
    a.cfg.backbone = parse_backbone(a.backbone);
    a.cfg.validate();
    ensure_dir(a.out);

    const Dataset ds = generate(a.cfg);
    std::ostringstream edges;
    write_edge_list(ds.graph, edges);
    std::ostringstream nodes;
    write_node_table(ds.table, nodes);
    const fs::path e = a.out / "edges.txt", n = a.out / "nodes.csv", t = a.out / "truth.json";
    write_text_file(e, edges.str());
    write_text_file(n, nodes.str());
    write_text_file(t, archetypes_json(ds.archetypes));

    std::size_t risk = 0;
    for (Label l : ds.table.labels) risk += l == Label::risk ? 1 : 0;
    json stats;
    stats["nodes"] = ds.graph.num_nodes();
    stats["edges"] = ds.graph.num_edges();
    stats["risk_nodes"] = risk;
    record(a.out, "generate", synth_json(a.cfg), {}, {e, n, t}, {{"stats", stats}});
    out << "generated " << ds.graph.num_nodes() << " nodes, " << ds.graph.num_edges()
        << " edges, " << risk << " risk nodes -> " << a.out.string() << "\n";
}

struct TrainArgs {
    TrainConfig cfg;
    std::string agg = "mean";
    bool directed = false;
    bool no_self_loops = false;
    bool no_class_weights = false;
    bool head_dim_given = false;
    std::optional<std::size_t> hypernum;
    fs::path data = ".";
    fs::path out;
};

void cmd_train(TrainArgs a, std::ostream& out) {
    if (a.hypernum) {
        throw ConfigError("--hypernum (hyperedge count) is not implemented: the method has no "
                          "described hyperedge mechanism; see README, section CLI");
    }
    a.cfg.agg = parse_aggregation(a.agg);
    a.cfg.self_loops = !a.no_self_loops;
    a.cfg.class_weights = !a.no_class_weights;
    if (!a.head_dim_given) {
        if (a.cfg.attention_heads == 0 || a.cfg.embed_size % a.cfg.attention_heads != 0) {
            throw ConfigError("embed_size (" + std::to_string(a.cfg.embed_size) +
                              ") must be divisible by attention_heads (" +
                              std::to_string(a.cfg.attention_heads) +
                              ") unless --head-dim is given");
        }
        a.cfg.head_dim = a.cfg.embed_size / a.cfg.attention_heads;
    }
    a.cfg.validate();
    if (a.out.empty()) a.out = a.data;

    const LoadedData d = load_dataset(a.data, a.directed);
    ensure_dir(a.out);
    const FitResult fit_result = fit(d.graph, d.table, a.cfg, [&](std::size_t epoch, double tl, double vl) {
        out << "epoch " << epoch << "/" << a.cfg.epochs << " train_loss=" << fmt(tl)
            << " val_loss=" << fmt(vl) << "\n";
    });
    const fs::path ck = a.out / "checkpoint.bin", loss = a.out / "loss.csv";
    save_checkpoint(fit_result.params, fit_result.log, ck);
    std::string csv = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < fit_result.log.epochs(); ++e) {
        csv += std::to_string(e + 1) + "," + fmt(fit_result.log.train_loss[e]) + "," +
               fmt(fit_result.log.val_loss[e]) + "\n";
    }
    write_text_file(loss, csv);

    json extra = json::object();
    const json data_manifest = read_manifest(a.data);
    if (fs::absolute(a.data) != fs::absolute(a.out) && data_manifest.contains("commands") &&
        data_manifest["commands"].contains("generate")) {
        extra["dataset"] = data_manifest["commands"]["generate"];
    }
    record(a.out, "train", train_json(a.cfg, a.directed),
           {a.data / "edges.txt", a.data / "nodes.csv"}, {ck, loss}, extra);
    out << "final epoch loss: " << fmt(fit_result.log.train_loss.back()) << "\n";
}

struct ScoreArgs {
    fs::path data = ".";
    fs::path run;
    std::string method = "quantile";
    double q = 0.95;
    std::string norm = "l2";
};

void cmd_score(ScoreArgs a, std::ostream& out) {
    if (a.run.empty()) a.run = a.data;
    Calibration cal;
    cal.method = parse_calibration_method(a.method);
    cal.q = a.q;
    const Norm norm = parse_norm(a.norm);
    const fs::path ck_path = require_file(a.run / "checkpoint.bin");
    require_file(a.data / "nodes.csv");
    require_file(a.data / "edges.txt");

    const Checkpoint ck = load_checkpoint(ck_path);
    const LoadedData d = load_dataset(a.data, trained_directed(a.run));
    const ForwardTrace trace = infer(d.graph, d.table, ck.params);
    const AnomalyReport report = score_dataset(trace.embeddings, d.table, cal, norm);
    const CalibrationCheck check = calibration_fpr(report, d.table);

    double cnorm = 0.0;
    for (double v : report.centroid) cnorm += v * v;
    json header;
    header["tau"] = report.tau;
    header["method"] = a.method;
    header["q"] = cal.q;
    header["norm"] = a.norm;
    header["centroid_norm"] = std::sqrt(cnorm);
    header["calibration_split"] = to_string(check.split);
    header["calibration_normals"] = check.normals;
    header["calibration_fpr"] = check.fpr;
    std::string csv = "# " + header.dump() + "\nnode_id,score,flagged\n";
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        csv += std::to_string(i) + "," + fmt(report.scores[i]) + "," + (report.flagged[i] ? "1" : "0") + "\n";
    }
    const fs::path scores = a.run / "scores.csv";
    write_text_file(scores, csv);
    json cfg;
    cfg["method"] = a.method;
    cfg["q"] = cal.q;
    cfg["norm"] = a.norm;
    record(a.run, "score", cfg, {ck_path, a.data / "edges.txt", a.data / "nodes.csv"}, {scores});
    out << "tau=" << fmt(report.tau) << " (" << cal.describe() << "), flagged "
        << report.flagged_count() << " of " << report.scores.size() << " nodes; FPR on "
        << check.normals << " " << to_string(check.split) << " normals = " << fmt(check.fpr) << "\n";
}

struct ScoresFile {
    json header;
    std::vector<double> scores;
    std::vector<std::uint8_t> flagged;
};

ScoresFile read_scores(const fs::path& path) {
    std::istringstream in(read_text_file(require_file(path)));
    ScoresFile s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        if (lineno == 1) {
            if (line.rfind("# ", 0) != 0) throw ParseError(where + ": missing JSON header");
            try {
                s.header = json::parse(line.substr(2));
            } catch (const json::exception& e) {
                throw ParseError(where + ": " + e.what());
            }
            continue;
        }
        if (lineno == 2) continue;
        const auto f = split_csv(line);
        if (f.size() != 3) throw ParseError(where + ": expected node_id,score,flagged");
        if (parse_int(f[0], where) != static_cast<std::int64_t>(s.scores.size())) {
            throw ParseError(where + ": node ids must be consecutive");
        }
        s.scores.push_back(parse_double(f[1], where));
        s.flagged.push_back(parse_int(f[2], where) != 0 ? 1 : 0);
    }
    if (!s.header.contains("tau")) throw ParseError(path.string() + ": header lacks tau");
    return s;
}

struct EvalArgs {
    fs::path data = ".";
    fs::path run;
};

void cmd_eval(EvalArgs a, std::ostream& out) {
    if (a.run.empty()) a.run = a.data;
    const fs::path ck_path = require_file(a.run / "checkpoint.bin");
    const fs::path scores_path = require_file(a.run / "scores.csv");
    require_file(a.data / "nodes.csv");
    require_file(a.data / "edges.txt");

    const ScoresFile sf = read_scores(scores_path);
    const Checkpoint ck = load_checkpoint(ck_path);
    const LoadedData d = load_dataset(a.data, trained_directed(a.run));
    if (sf.scores.size() != d.table.num_nodes()) {
        throw ShapeError("scores.csv has " + std::to_string(sf.scores.size()) + " rows for " +
                         std::to_string(d.table.num_nodes()) + " nodes");
    }
    const ForwardTrace trace = infer(d.graph, d.table, ck.params);
    AnomalyReport report;
    report.tau = sf.header["tau"].get<double>();
    report.scores = sf.scores;
    report.flagged = sf.flagged;
    const TestEvaluation t = evaluate_test(report, risk_probability(trace.logits), d.table);
    const auto& m = t.distance.metrics;

    json j;
    j["auc"] = t.distance.auc;
    j["classifier_auc"] = t.classifier_auc;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["accuracy"] = m.accuracy;
    j["tau"] = report.tau;
    j["tau_method"] = sf.header.value("method", "");
    j["confusion"] = {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}};
    j["test_positives"] = t.positives;
    j["test_negatives"] = t.negatives;
    j["notes"] = m.notes;
    const fs::path eval = a.run / "eval.json", roc = a.run / "roc.csv", metrics = a.run / "metrics.csv";
    write_text_file(eval, j.dump(2) + "\n");
    std::string roc_csv = "fpr,tpr\n";
    for (const auto& p : t.distance.roc) roc_csv += fmt(p.fpr) + "," + fmt(p.tpr) + "\n";
    write_text_file(roc, roc_csv);
    std::string mcsv = "metric,value\n";
    for (const auto& [k, v] : {std::pair{"auc", t.distance.auc}, {"classifier_auc", t.classifier_auc},
                               {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                               {"accuracy", m.accuracy}}) {
        mcsv += std::string(k) + "," + fmt(v) + "\n";
    }
    write_text_file(metrics, mcsv);
    record(a.run, "eval", json::object(), {ck_path, scores_path, a.data / "nodes.csv"}, {eval, roc, metrics});
    out << "test AUC (distance) = " << fmt(t.distance.auc) << ", AUC (classifier) = "
        << fmt(t.classifier_auc) << ", precision = " << fmt(m.precision) << ", recall = "
        << fmt(m.recall) << ", F1 = " << fmt(m.f1) << "\n";
}

struct ReportArgs {
    fs::path run = ".";
    fs::path out;
};

void cmd_report(ReportArgs a, std::ostream& out) {
    if (a.out.empty()) a.out = a.run / "report";
    const fs::path loss = require_file(a.run / "loss.csv");
    const fs::path roc = require_file(a.run / "roc.csv");
    const fs::path metrics = require_file(a.run / "metrics.csv");
    const fs::path eval = require_file(a.run / "eval.json");
    ensure_dir(a.out);
    std::vector<fs::path> written;
    for (const auto& f : {loss, roc, metrics, eval}) {
        write_text_file(a.out / f.filename(), read_text_file(f));
        written.push_back(a.out / f.filename());
    }

    json e;
    try {
        e = json::parse(read_text_file(eval));
    } catch (const json::exception& ex) {
        throw ParseError("malformed " + eval.string() + ": " + ex.what());
    }
    std::istringstream lin(read_text_file(loss));
    std::string line;
    std::vector<std::string> rows;
    std::getline(lin, line);
    while (std::getline(lin, line)) {
        if (!line.empty()) rows.push_back(line);
    }
    std::ostringstream s;
    s << "gnnrisk run summary\n\n";
    s << "Training loss (loss.csv, " << rows.size() << " epochs)\n";
    if (!rows.empty()) {
        const auto first = split_csv(rows.front());
        const auto last = split_csv(rows.back());
        s << "  epoch 1 train loss:  " << first.at(1) << "\n";
        s << "  final train loss:    " << last.at(1) << "\n";
        s << "  final val loss:      " << last.at(2) << "\n";
    }
    s << "\nTest-set detection (roc.csv holds the distance-score ROC)\n";
    s << "  AUC, distance score: " << fmt(e.value("auc", 0.0)) << "\n";
    s << "  AUC, classifier:     " << fmt(e.value("classifier_auc", 0.0)) << "\n";
    s << "  threshold tau:       " << fmt(e.value("tau", 0.0)) << " (" << e.value("tau_method", "") << ")\n";
    s << "\nFlags at tau (metrics.csv)\n";
    s << "  precision: " << fmt(e.value("precision", 0.0)) << "\n";
    s << "  recall:    " << fmt(e.value("recall", 0.0)) << "\n";
    s << "  F1:        " << fmt(e.value("f1", 0.0)) << "\n";
    s << "  accuracy:  " << fmt(e.value("accuracy", 0.0)) << "\n";
    if (e.contains("confusion")) {
        const auto& c = e["confusion"];
        s << "  confusion: tp=" << c.value("tp", 0) << " fp=" << c.value("fp", 0)
          << " tn=" << c.value("tn", 0) << " fn=" << c.value("fn", 0) << "\n";
    }
    const fs::path summary = a.out / "summary.txt";
    write_text_file(summary, s.str());
    written.push_back(summary);
    record(a.run, "report", json::object(), {loss, roc, metrics, eval}, written);
    out << s.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graph neural network risk detection: generate, train, score, eval, report", "gnnrisk"};
    app.set_version_flag("--version", std::string("gnnrisk ") + GNNRISK_VERSION);
    app.require_subcommand(1);
    // a repeated option keeps its last value, so appended flags override earlier ones
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    auto formatter = std::make_shared<FlatConfig>();

    GenerateArgs g;
    auto* gen = app.add_subcommand("generate", "Write a synthetic financial network with planted risk nodes");
    gen->config_formatter(formatter);
    gen->set_config("--config", "", "Flat JSON or key=value file; flags override it");
    gen->add_option("-o,--out", g.out, "Output directory")->required();
    gen->add_option("--nodes", g.cfg.num_nodes, "Number of nodes")->capture_default_str();
    gen->add_option("--edges", g.cfg.target_edges, "Target edge count")->capture_default_str();
    gen->add_option("--anomaly-rate", g.cfg.anomaly_rate, "Fraction of risk nodes")->capture_default_str();
    gen->add_option("--mix", g.mix, "Archetype weights ring,hub,bridge")->capture_default_str();
    gen->add_option("--feature-dim", g.cfg.feature_dim, "Feature columns")->capture_default_str();
    gen->add_option("--signal", g.cfg.signal_strength, "Signal strength (0 = no signal)")->capture_default_str();
    gen->add_option("--seed", g.cfg.seed, "Random seed")->capture_default_str();
    gen->add_option("--backbone", g.backbone, "pa (preferential attachment) or sbm")->capture_default_str();

    TrainArgs t;
    auto* train = app.add_subcommand("train", "Train the GNN and save checkpoint.bin and loss.csv");
    train->config_formatter(formatter);
    train->set_config("--config", "", "Flat JSON or key=value file; flags override it");
    train->add_option("-d,--data", t.data, "Dataset directory")->capture_default_str();
    train->add_option("-o,--out", t.out, "Run directory (default: the dataset directory)");
    train->add_option("--entity-num", t.cfg.entity_num, "Expected node count (0: from data)")->capture_default_str();
    train->add_option("--embed-size", t.cfg.embed_size, "Embedding dimension")->capture_default_str();
    train->add_option("--attention-heads", t.cfg.attention_heads, "Attention heads")->capture_default_str();
    auto* head_dim = train->add_option("--head-dim", t.cfg.head_dim, "Per-head dimension (default embed/heads)");
    train->add_option("--dropout", t.cfg.dropout, "Dropout rate")->capture_default_str();
    train->add_option("--lr", t.cfg.lr, "Adam learning rate")->capture_default_str();
    train->add_option("--epochs", t.cfg.epochs, "Epochs")->capture_default_str();
    train->add_option("--batches", t.cfg.batches_per_epoch, "Mini-batches per epoch")->capture_default_str();
    train->add_option("--seed", t.cfg.seed, "Random seed")->capture_default_str();
    train->add_option("--agg", t.agg, "GCN aggregation: mean or sum")->capture_default_str();
    train->add_option("--gcn-layers", t.cfg.gcn_layers, "GCN layers")->capture_default_str();
    train->add_option("--attention-layers", t.cfg.attention_layers, "Attention layers")->capture_default_str();
    train->add_flag("--directed", t.directed, "Treat edges as directed");
    train->add_flag("--no-self-loops", t.no_self_loops, "Aggregate over neighbors only");
    train->add_flag("--no-class-weights", t.no_class_weights, "Unweighted cross-entropy");
    train->add_option("--hypernum", t.hypernum, "Hyperedge count (not implemented)");

    ScoreArgs s;
    auto* score = app.add_subcommand("score", "Score every node by distance to the normal centroid");
    score->config_formatter(formatter);
    score->set_config("--config", "", "Flat JSON or key=value file; flags override it");
    score->add_option("-d,--data", s.data, "Dataset directory")->capture_default_str();
    score->add_option("-r,--run", s.run, "Run directory (default: the dataset directory)");
    score->add_option("--tau-method", s.method, "quantile or max_f1")->capture_default_str();
    score->add_option("-q,--q", s.q, "Quantile for --tau-method quantile")->capture_default_str();
    score->add_option("--norm", s.norm, "l2 or l1")->capture_default_str();

    EvalArgs e;
    auto* ev = app.add_subcommand("eval", "Evaluate scores on the test split");
    ev->config_formatter(formatter);
    ev->set_config("--config", "", "Flat JSON or key=value file; flags override it");
    ev->add_option("-d,--data", e.data, "Dataset directory")->capture_default_str();
    ev->add_option("-r,--run", e.run, "Run directory (default: the dataset directory)");

    ReportArgs r;
    auto* rep = app.add_subcommand("report", "Bundle loss, ROC and metrics with a text summary");
    rep->add_option("-r,--run", r.run, "Run directory")->capture_default_str();
    rep->add_option("-o,--out", r.out, "Report directory (default: <run>/report)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        try {
            app.parse(reversed);
        } catch (const CLI::ParseError& pe) {
            const int code = app.exit(pe, out, err);
            return code == 0 ? 0 : 2;
        }
        for (CLI::App* sub : {gen, train, score, ev}) {
            if (sub->parsed()) apply_config(sub, *formatter);
        }
        t.head_dim_given = head_dim->count() > 0;
        if (gen->parsed()) cmd_generate(g, out);
        if (train->parsed()) cmd_train(t, out);
        if (score->parsed()) cmd_score(s, out);
        if (ev->parsed()) cmd_eval(e, out);
        if (rep->parsed()) cmd_report(r, out);
        return 0;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return ex.exit_code();
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    }
}

}  // namespace gnnrisk
