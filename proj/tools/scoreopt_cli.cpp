// Command-line front end: dataset generation, score-model and classifier
// training, defended evaluation, sweeps, and inference benchmarking, all
// driven by structured-text spec files.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "scoreopt/dataset.hpp"
#include "scoreopt/harness.hpp"
#include "scoreopt/score_net.hpp"
#include "scoreopt/serialize.hpp"

namespace {

using namespace scoreopt;

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string item =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (item.empty()) throw ConfigError("empty entry in list '" + text + "'");
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size()) throw ConfigError("bad number '" + item + "' in list");
        out.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

std::vector<std::size_t> parse_step_list(const std::string& text) {
    std::vector<std::size_t> steps;
    for (double v : parse_double_list(text)) {
        if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw ConfigError("step counts must be integers >= 1");
        steps.push_back(static_cast<std::size_t>(v));
    }
    return steps;
}

std::size_t class_count(const LabeledSet& data) {
    int hi = -1;
    for (int y : data.labels) hi = std::max(hi, y);
    return static_cast<std::size_t>(hi + 1);
}

int run(int argc, char** argv) {
    CLI::App app{"desk-scale score-based purification laboratory"};
    app.require_subcommand(1);

    // gen-data ---------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "draw a labeled synthetic dataset as csv");
    std::string gen_kind = "gmm-classes";
    std::size_t gen_n = 2000;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    std::string gen_prior_out;
    gen->add_option("--kind", gen_kind,
                    "dataset kind, e.g. gmm-classes:modes=8,classes=4,sep=13,dim=2");
    gen->add_option("--n", gen_n, "number of samples")->required();
    gen->add_option("--seed", gen_seed, "rng seed")->required();
    gen->add_option("--out", gen_out, "output csv path")->required();
    gen->add_option("--prior-out", gen_prior_out,
                    "also write the analytic mixture as a score-model file (gmm kinds only)");

    // train-score ------------------------------------------------------
    auto* ts = app.add_subcommand("train-score", "fit a score network by denoising score "
                                                 "matching");
    std::string ts_data, ts_out, ts_hidden = "64,64";
    DsmTrainConfig ts_cfg;
    ts->add_option("--data", ts_data, "training csv")->required();
    ts->add_option("--out", ts_out, "output model path")->required();
    ts->add_option("--sigma-min", ts_cfg.sigma_min, "smallest training noise level")->required();
    ts->add_option("--sigma-max", ts_cfg.sigma_max, "largest training noise level")->required();
    ts->add_option("--iters", ts_cfg.iters, "adam iterations")->required();
    ts->add_option("--lr", ts_cfg.lr, "adam learning rate")->required();
    ts->add_option("--seed", ts_cfg.seed, "rng seed")->required();
    ts->add_option("--batch", ts_cfg.batch, "minibatch size");
    ts->add_option("--hidden", ts_hidden, "hidden layer widths, comma list");

    // train-clf --------------------------------------------------------
    auto* tc = app.add_subcommand("train-clf", "fit a softmax classifier on labeled data");
    std::string tc_data, tc_arch = "mlp:32", tc_out;
    std::size_t tc_epochs = 10;
    double tc_lr = 0.05;
    std::uint64_t tc_seed = 0;
    tc->add_option("--data", tc_data, "training csv")->required();
    tc->add_option("--arch", tc_arch, "linear | mlp:<width> | mlp:<width>:<gain>")->required();
    tc->add_option("--out", tc_out, "output model path")->required();
    tc->add_option("--epochs", tc_epochs, "training epochs")->required();
    tc->add_option("--lr", tc_lr, "adam learning rate")->required();
    tc->add_option("--seed", tc_seed, "rng seed")->required();

    // init-spec --------------------------------------------------------
    auto* init = app.add_subcommand("init-spec", "write the stock benchmark experiment spec");
    std::string init_out, init_model, init_clf;
    std::uint64_t init_seed = 0;
    init->add_option("--out", init_out, "output spec path")->required();
    init->add_option("--score-model", init_model, "score-model path to reference");
    init->add_option("--classifier", init_clf, "classifier path to reference");
    init->add_option("--seed", init_seed, "experiment seed");

    // evaluate ---------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "run one defended evaluation from a spec file");
    std::string ev_spec, ev_out, ev_format = "text";
    std::size_t ev_workers = 1;
    ev->add_option("--spec", ev_spec, "experiment spec file")->required();
    ev->add_option("--out", ev_out, "output results path")->required();
    ev->add_option("--format", ev_format, "text | csv");
    ev->add_option("--workers", ev_workers, "evaluation threads (outputs are identical)");

    // sweep ------------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "evaluate along one purifier axis");
    std::string sw_spec, sw_axis, sw_values, sw_out, sw_format = "csv";
    std::size_t sw_workers = 1;
    sw->add_option("--spec", sw_spec, "experiment spec file")->required();
    sw->add_option("--axis", sw_axis, "steps | lambda | lambda-reg | noise")->required();
    sw->add_option("--values", sw_values, "comma list of axis values")->required();
    sw->add_option("--out", sw_out, "output results path")->required();
    sw->add_option("--format", sw_format, "text | csv");
    sw->add_option("--workers", sw_workers, "evaluation threads (outputs are identical)");

    // bench ------------------------------------------------------------
    auto* be = app.add_subcommand("bench", "per-step purifier cost table");
    std::string be_spec, be_steps, be_out;
    be->add_option("--spec", be_spec, "experiment spec file")->required();
    be->add_option("--steps", be_steps, "comma list of step counts")->required();
    be->add_option("--out", be_out, "output csv path")->required();

    CLI11_PARSE(app, argc, argv);

    const auto parse_format = [](const std::string& f) {
        if (f == "text") return ResultFormat::Text;
        if (f == "csv") return ResultFormat::Csv;
        throw ConfigError("unknown format '" + f + "' (want text or csv)");
    };

    if (gen->parsed()) {
        const DatasetKind kind = parse_dataset_kind(gen_kind);
        const LabeledSet data = gen_dataset(kind, gen_n, gen_seed);
        save_dataset_csv(data, gen_out);
        if (!gen_prior_out.empty()) save_text_file(gmm_for_kind(kind), gen_prior_out);
        std::printf("wrote %zu samples (dim %zu) to %s\n", data.size(), data.dim(),
                    gen_out.c_str());
        return 0;
    }
    if (ts->parsed()) {
        const LabeledSet data = load_dataset_csv(ts_data);
        std::vector<std::size_t> hidden;
        for (double v : parse_double_list(ts_hidden)) {
            if (!(v >= 1.0)) throw ConfigError("hidden widths must be >= 1");
            hidden.push_back(static_cast<std::size_t>(v));
        }
        RngStream rng(ts_cfg.seed);
        MlpScoreNet net(data.dim(), hidden, rng);
        net = train_dsm(std::move(net), data.points, ts_cfg);
        save_text_file(net, ts_out);
        std::printf("wrote score net (dim %zu) to %s\n", net.dim(), ts_out.c_str());
        return 0;
    }
    if (tc->parsed()) {
        const LabeledSet data = load_dataset_csv(tc_data);
        const ClassifierArch arch = parse_classifier_arch(tc_arch);
        const Classifier clf = train_classifier(data, class_count(data), arch.hidden, tc_epochs,
                                                tc_lr, tc_seed, arch.gain);
        save_text_file(clf, tc_out);
        std::printf("wrote classifier (%zu classes, accuracy %.2f%% on its training set) to "
                    "%s\n",
                    clf.classes(), 100.0 * accuracy(clf, data), tc_out.c_str());
        return 0;
    }
    if (init->parsed()) {
        ExperimentSpec spec = toy_benchmark_spec(init_seed);
        spec.score_model_path = init_model;
        spec.classifier_path = init_clf;
        save_text_file(spec, init_out);
        std::printf("wrote benchmark spec to %s\n", init_out.c_str());
        return 0;
    }
    if (ev->parsed()) {
        const ExperimentSpec spec = load_experiment_spec_file(ev_spec);
        const ResultRecord rec = run_experiment(spec, ev_workers);
        emit_results({rec}, ev_out, parse_format(ev_format));
        std::printf("standard %.2f%% (sd %.2f)  robust %.2f%% (sd %.2f)  -> %s\n",
                    rec.standard_acc, rec.standard_std, rec.robust_acc, rec.robust_std,
                    ev_out.c_str());
        return 0;
    }
    if (sw->parsed()) {
        const ExperimentSpec spec = load_experiment_spec_file(sw_spec);
        const auto records = sweep(spec, sw_axis, parse_double_list(sw_values), sw_workers);
        emit_results(records, sw_out, parse_format(sw_format));
        for (const ResultRecord& r : records)
            std::printf("%-16s standard %.2f%%  robust %.2f%%\n", r.label.c_str(),
                        r.standard_acc, r.robust_acc);
        std::printf("wrote %zu records to %s\n", records.size(), sw_out.c_str());
        return 0;
    }
    if (be->parsed()) {
        const ExperimentSpec spec = load_experiment_spec_file(be_spec);
        const auto rows = bench_inference(spec, parse_step_list(be_steps));
        emit_bench_csv(rows, be_out);
        for (const BenchRow& r : rows)
            std::printf("%-12s steps %3zu  %.3e s/sample  %.1f forwards  %.1f vjps\n",
                        r.method.c_str(), r.steps, r.seconds_per_sample, r.forwards_per_sample,
                        r.vjps_per_sample);
        std::printf("wrote %zu rows to %s\n", rows.size(), be_out.c_str());
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
