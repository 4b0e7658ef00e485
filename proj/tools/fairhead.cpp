// fairhead: command line front end for the fairhead library.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairhead/cohort.hpp"
#include "fairhead/dataset.hpp"
#include "fairhead/experiment.hpp"
#include "fairhead/metrics.hpp"
#include "fairhead/model.hpp"
#include "fairhead/synth.hpp"
#include "fairhead/training.hpp"

namespace fs = std::filesystem;
using namespace fairhead;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

// Train/test rows: an explicit split file, then the dataset's own splits.csv,
// then every row on both sides.
DatasetSplit resolve_split(const Dataset& d, const fs::path& data_dir, const std::string& split_file) {
    if (!split_file.empty()) return load_split(d, split_file);
    if (auto stored = load_dataset_split(data_dir, d)) return *stored;
    const auto rows = all_rows(d);
    return {rows, rows};
}

GroupAssignment groups_for(const Dataset& d, const std::string& spec_file, const std::vector<std::size_t>& train) {
    if (spec_file.empty()) throw Error("--cohort-spec is required");
    return assign_groups(d, resolve_thresholds(load_cohort_spec(spec_file), d, train));
}

struct TrainFlags {
    std::string data, split, cohort_spec, method, model_in, model_out;
    double lr = 0.0, weight_decay = 0.0, alpha = 0.0;
    std::size_t batch_size = 0, epochs = 0, units_per_group = 0;
    std::optional<std::size_t> sample_budget;
    std::uint64_t seed = 0;
    std::vector<std::size_t> layers;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, const TrainConfig& defaults) {
    f.lr = defaults.learning_rate;
    f.weight_decay = defaults.weight_decay;
    f.batch_size = defaults.batch_size;
    f.epochs = defaults.epochs;
    f.alpha = defaults.alpha;
    f.units_per_group = defaults.units_per_group;
    cmd->add_option("--data", f.data, "Dataset directory")->required();
    cmd->add_option("--split", f.split, "splits.csv to use instead of the dataset's own");
    cmd->add_option("--cohort-spec", f.cohort_spec, "Cohort spec JSON");
    cmd->add_option("--lr", f.lr, "Learning rate")->capture_default_str();
    cmd->add_option("--weight-decay", f.weight_decay, "Decoupled weight decay")->capture_default_str();
    cmd->add_option("--batch-size", f.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--epochs", f.epochs, "Epochs")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Seed")->capture_default_str();
    cmd->add_option("--model-out", f.model_out, "Output model directory")->required();
}

TrainConfig config_of(const TrainFlags& f, Method m) {
    TrainConfig c;
    c.method = m;
    c.learning_rate = f.lr;
    c.weight_decay = f.weight_decay;
    c.batch_size = f.batch_size;
    c.epochs = f.epochs;
    c.alpha = f.alpha;
    c.seed = f.seed;
    c.units_per_group = f.units_per_group;
    c.sample_budget = f.sample_budget;
    c.validate();
    return c;
}

int run_pretrain(const TrainFlags& f) {
    if (!f.method.empty() && parse_method(f.method) != Method::erm)
        throw Error("pretrain only supports --method erm");
    const auto d = load_dataset(f.data);
    const auto split = resolve_split(d, f.data, f.split);
    ExtractorConfig arch;
    if (!f.layers.empty()) arch.layer_widths = f.layers;
    TrainLog log;
    const auto model = pretrain_extractor(d, split.train, arch, config_of(f, Method::erm), &log);
    save_extractor(model, f.model_out);
    if (!log.batch_loss.empty() && !log.batch_loss.back().empty())
        std::fprintf(stderr, "pretrained on %zu rows; last batch loss %.6f\n", split.train.size(),
                     log.batch_loss.back().back());
    return 0;
}

int run_finetune(const TrainFlags& f) {
    const Method method = parse_method(f.method);
    if (method == Method::erm) throw Error("ERM keeps the pre-trained head; use pretrain");
    if (f.model_in.empty()) throw Error("--model-in (pre-trained extractor) is required");
    const auto d = load_dataset(f.data);
    if (!d.reference_class()) throw Error("dataset has no reference class");
    const auto split = resolve_split(d, f.data, f.split);
    const auto groups = groups_for(d, f.cohort_spec, split.train);
    const auto extractor = load_extractor(f.model_in);
    const auto cfg = config_of(f, method);

    std::vector<std::size_t> rows;
    if (method == Method::fine_tune)
        rows = random_sample(d, cfg.sample_budget.value_or(groups.group_count * cfg.units_per_group), f.seed,
                             split.train);
    else
        rows = balanced_sample(d, groups, cfg.units_per_group, f.seed, split.train);

    const auto weights = class_weights(gather_rows(d.labels(), split.train), *d.reference_class());
    const auto features = extract_features(extractor, gather_rows(d.features(), rows));
    const auto head = finetune_head(features, gather_rows(d.labels(), rows), select_rows(groups, rows), weights, cfg);
    save_head(head, f.model_out);
    std::fprintf(stderr, "%s head trained on %zu rows (%zu units)\n", method_label(method).c_str(), rows.size(),
                 units_of(d, rows).size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fairness-constrained, class-balanced last-layer fine-tuning"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
    SynthConfig sc = std::get<SynthConfig>(ExperimentConfig::desk_defaults().data);
    std::string synth_out;
    double synth_test_fraction = 0.2;
    synth->add_option("--n", sc.n, "Samples")->capture_default_str();
    synth->add_option("--d", sc.d, "Feature dimension")->capture_default_str();
    synth->add_option("--c", sc.c, "Labels, including the reference label")->capture_default_str();
    synth->add_option("--attrs", sc.attribute_count, "Binary attributes (groups = 2^attrs)")->capture_default_str();
    synth->add_option("--beta", sc.group_bias, "Group bias in [0, 1]")->capture_default_str();
    synth->add_option("--prevalence", sc.prevalence, "One prevalence, or one per finding")->delimiter(',');
    synth->add_option("--signal", sc.signal_scale, "Class signal scale")->capture_default_str();
    synth->add_option("--group-signal", sc.group_signal, "Attribute signature strength")->capture_default_str();
    synth->add_option("--seed", sc.seed, "Seed")->capture_default_str();
    synth->add_option("--test-fraction", synth_test_fraction, "Unit share written as test in splits.csv (0 skips)")
        ->capture_default_str();
    synth->add_option("--out", synth_out, "Output dataset directory")->required();

    // cohort
    auto* cohort = app.add_subcommand("cohort", "Count samples per intersectional group");
    std::string cohort_data, cohort_spec, cohort_out;
    bool cohort_table = false;
    cohort->add_option("--data", cohort_data, "Dataset directory")->required();
    cohort->add_option("--spec", cohort_spec, "Cohort spec JSON")->required();
    cohort->add_option("--out", cohort_out, "Output CSV (stdout when omitted)");
    cohort->add_flag("--table", cohort_table, "Also print a table with level names");

    const auto desk = ExperimentConfig::desk_defaults();

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "Train the feature extractor and ERM head");
    TrainFlags pf;
    add_train_flags(pretrain, pf, desk.pretrain);
    pretrain->add_option("--method", pf.method, "Must be erm");
    pretrain->add_option("--layers", pf.layers, "Hidden/feature widths, e.g. 64,32")->delimiter(',');

    // finetune
    auto* finetune = app.add_subcommand("finetune", "Train a fresh head on frozen features");
    TrainFlags ff;
    add_train_flags(finetune, ff, desk.finetune);
    finetune->add_option("--method", ff.method, "finetune, dfr or fair-cb")->required();
    finetune->add_option("--alpha", ff.alpha, "Fairness penalty weight")->capture_default_str();
    finetune->add_option("--units-per-group", ff.units_per_group, "Balanced draw size per group")
        ->capture_default_str();
    finetune->add_option("--sample-budget", ff.sample_budget, "finetune draw size in units");
    finetune->add_option("--model-in", ff.model_in, "Pre-trained extractor directory")->required();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a head on the test split");
    std::string ev_data, ev_split, ev_spec, ev_model, ev_extractor, ev_format = "json", ev_report;
    double ev_threshold = kDefaultThreshold;
    evaluate_cmd->add_option("--data", ev_data, "Dataset directory")->required();
    evaluate_cmd->add_option("--split", ev_split, "splits.csv to use instead of the dataset's own");
    evaluate_cmd->add_option("--cohort-spec", ev_spec, "Cohort spec JSON")->required();
    evaluate_cmd->add_option("--model-in", ev_model, "Head directory (the extractor's ERM head when omitted)");
    evaluate_cmd->add_option("--extractor-in", ev_extractor, "Extractor directory")->required();
    evaluate_cmd->add_option("--threshold", ev_threshold, "Decision threshold")->capture_default_str();
    evaluate_cmd->add_option("--out", ev_format, "Report format")->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    evaluate_cmd->add_option("--report", ev_report, "Write the report here instead of stdout");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run the four-method comparison");
    std::string ex_config, ex_out, ex_format;
    std::size_t ex_workers = 1;
    experiment->add_option("--config", ex_config, "Experiment JSON (desk defaults when omitted)");
    experiment->add_option("--out", ex_out, "Report path (stdout when omitted)");
    experiment->add_option("--format", ex_format, "csv or json")->check(CLI::IsMember({"json", "csv"}));
    experiment->add_option("--parallel", ex_workers, "Worker threads")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto d = generate(sc);
            std::optional<DatasetSplit> split;
            if (synth_test_fraction > 0.0) split = split_by_unit(d, synth_test_fraction, sc.seed);
            save_dataset(d, synth_out, split);
            write_text(fs::path(synth_out) / "cohort.json", cohort_spec_to_json(default_cohort_spec(sc)));
            std::fprintf(stderr, "wrote %zu samples to %s\n", d.n(), synth_out.c_str());
            return 0;
        }
        if (*cohort) {
            const auto d = load_dataset(cohort_data);
            const auto split = resolve_split(d, cohort_data, "");
            const auto spec = resolve_thresholds(load_cohort_spec(cohort_spec), d, split.train);
            const auto counts = group_counts(assign_groups(d, spec));
            const auto csv = group_counts_csv(counts, spec);
            if (cohort_out.empty()) std::cout << csv;
            else write_text(cohort_out, csv);
            if (cohort_table) std::cout << group_counts_table(counts, spec);
            return 0;
        }
        if (*pretrain) return run_pretrain(pf);
        if (*finetune) return run_finetune(ff);
        if (*evaluate_cmd) {
            const auto d = load_dataset(ev_data);
            const auto split = resolve_split(d, ev_data, ev_split);
            const auto groups = groups_for(d, ev_spec, split.train);
            const auto extractor = load_extractor(ev_extractor);
            const auto head = ev_model.empty() ? extractor.head : load_head(ev_model);
            const auto report = evaluate(head, extractor, d, split.test, groups, ev_threshold);
            const auto name = method_label(head.meta.method);
            const auto text = ev_format == "csv" ? report_to_csv(report, name) : report_to_json(report, name);
            if (ev_report.empty()) std::cout << text;
            else write_text(ev_report, text);
            return 0;
        }
        if (*experiment) {
            auto cfg = ex_config.empty() ? ExperimentConfig::desk_defaults() : load_experiment_config(ex_config);
            if (!ex_format.empty()) cfg.format = parse_report_format(ex_format);
            if (!ex_out.empty()) cfg.output = ex_out;
            const auto table = run_experiment(cfg, ex_workers);
            if (cfg.output) emit_report(table, cfg.format, *cfg.output);
            else std::cout << format_report(table, cfg.format);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fairhead: %s\n", e.what());
        return 1;
    }
    return 0;
}
